"""Monte Carlo simulation of the ring dynamics.

Two update rules are provided.  :func:`step` applies the cluster-chipping
form: every cluster of the pre-sweep configuration independently loses its
``m`` leading particles, each advancing one site.  :func:`bond_sweep_step`
updates bonds one at a time against the direction of motion, hopping with
probability ``p`` into a site that was empty at sweep start and ``p_tilde``
into a site vacated earlier in the same sweep.  Both rules draw their random
numbers as uniforms in a fixed order, and the compiled kernels used by
:func:`run` consume uniforms in exactly the same order as the pure-Python
versions.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numba
import numpy as np

from .core import DomainError, ModelParams, RingConfig, decompose

Dynamics = Literal["chip", "bond"]

THREADS_ENV = "GTASEP_THREADS"
CHUNK_SWEEPS = 1 << 15


class InitialCondition(str, Enum):
    SINGLE_CLUSTER = "single-cluster"
    ALTERNATING = "alternating"
    UNIFORM_RANDOM = "uniform-random"


@dataclass(frozen=True)
class SimConfig:
    L: int
    N: int
    params: ModelParams
    measure_sweeps: int
    burn_in_sweeps: int | None = None
    seed: int = 0
    replicas: int = 1
    initial: InitialCondition = InitialCondition.UNIFORM_RANDOM
    dynamics: Dynamics = "chip"
    batches: int = 20

    def __post_init__(self):
        if self.L < 2 or not 0 <= self.N <= self.L:
            raise DomainError("need L >= 2 and 0 <= N <= L")
        if self.burn_in_sweeps is not None and self.burn_in_sweeps < 0:
            raise DomainError("burn-in must be non-negative")
        if self.measure_sweeps < 1 or self.replicas < 1:
            raise DomainError("need at least one measurement sweep and one replica")
        if self.batches < 2:
            raise DomainError("batch-means errors need at least two batches")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.dynamics not in ("chip", "bond"):
            raise DomainError(f"unknown dynamics {self.dynamics!r}")
        object.__setattr__(self, "initial", InitialCondition(self.initial))
        self.params.require_rates()

    @property
    def burn_in(self) -> int:
        return 10 * self.L if self.burn_in_sweeps is None else self.burn_in_sweeps


# ---------------------------------------------------------------------------
# single-sweep updates on RingConfig


def _chip_length(u: float, n: int, p: float, pt: float) -> int:
    """Inverse-CDF draw of the chip length from one uniform ``u`` in ``[0, 1)``."""
    v = 1.0 - u
    m, thr = 0, p
    while m < n and v <= thr:
        m += 1
        thr *= pt
    return m


def step(config: RingConfig, params: ModelParams, rng) -> tuple[RingConfig, int]:
    """One chipping sweep; clusters are drawn in order of their start site."""
    p, pt = (float(v) for v in params.require_rates())
    L, N = config.L, config.N
    dec = decompose(config)
    if N == L or dec.k == 0:
        return config, 0
    u = rng.random(dec.k)
    bits, jumps = config.bits, 0
    # all chip lengths refer to the pre-sweep clusters
    for (start, n), uj in zip(dec.clusters, u):
        m = _chip_length(uj, n, p, pt)
        if m:
            front = (start - 1 + n - 1) % L
            bits &= ~(1 << ((front - m + 1) % L))
            bits |= 1 << ((front + 1) % L)
            jumps += m
    new = RingConfig(L, bits)
    assert new.N == N
    return new, jumps


def _seam(occ) -> int:
    """0-based index of the first empty site clockwise from site 1."""
    return next(i for i, t in enumerate(occ) if not t)


def bond_sweep_step(config: RingConfig, params: ModelParams, rng) -> tuple[RingConfig, int]:
    """One backward-ordered sweep over bonds, anchored at the first hole.

    With ``s`` the first empty site, bonds ``(s-1, s), (s-2, s-1), ...,
    (s+1, s+2)`` are visited in turn.  The bond ``(s, s+1)`` would come first
    in the same backward order and is a no-op there because ``s`` is empty,
    so it is left out; visiting it last instead would let the particle that
    just entered ``s`` move twice.  One uniform is drawn per hop attempt.
    """
    p, pt = (float(v) for v in params.require_rates())
    L, N = config.L, config.N
    if N == L or N == 0:
        return config, 0
    occ = list(config.occupancy)
    s = _seam(occ)
    jumps = 0
    fresh = False  # site ``i + 1`` of the current bond was vacated in this sweep
    for off in range(1, L):
        i = (s - off) % L
        j = (i + 1) % L
        if occ[i] and not occ[j]:
            if rng.random() < (pt if fresh else p):
                occ[i], occ[j] = 0, 1
                jumps += 1
                fresh = True
                continue
        fresh = False
    new = RingConfig.from_occupancy(occ)
    assert new.N == N
    return new, jumps


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _chip_sweep(occ, p, pt, u, fronts, sizes):
    L = occ.shape[0]
    k = 0
    for i in range(L):
        if occ[i] == 1 and occ[(i - 1) % L] == 0:
            n = 1
            while occ[(i + n) % L] == 1:
                n += 1
            fronts[k] = (i + n - 1) % L
            sizes[k] = n
            k += 1
    jumps = 0
    for c in range(k):
        n = sizes[c]
        v = 1.0 - u[c]
        m = 0
        thr = p
        while m < n and v <= thr:
            m += 1
            thr *= pt
        if m > 0:
            f = fronts[c]
            occ[(f - m + 1) % L] = 0
            occ[(f + 1) % L] = 1
            jumps += m
    return jumps


@numba.njit(cache=True, nogil=True)
def _bond_sweep(occ, p, pt, u):
    L = occ.shape[0]
    s = 0
    while occ[s] == 1:
        s += 1
    jumps = 0
    used = 0
    fresh = False
    for off in range(1, L):
        i = (s - off) % L
        j = (i + 1) % L
        if occ[i] == 1 and occ[j] == 0:
            q = pt if fresh else p
            draw = u[used]
            used += 1
            if draw < q:
                occ[i] = 0
                occ[j] = 1
                jumps += 1
                fresh = True
                continue
        fresh = False
    return jumps


@numba.njit(cache=True, nogil=True)
def _cluster_count(occ):
    L = occ.shape[0]
    k = 0
    for i in range(L):
        if occ[i] == 1 and occ[(i + 1) % L] == 0:
            k += 1
    return k


@numba.njit(cache=True, nogil=True)
def _advance(occ, p, pt, uniforms, bond, measure, jumps_acc, dens_acc, corr_acc, hist_acc):
    """Run ``uniforms.shape[0]`` sweeps; accumulate observables if ``measure``."""
    L = occ.shape[0]
    fronts = np.empty(L, np.int64)
    sizes = np.empty(L, np.int64)
    total = 0
    for t in range(uniforms.shape[0]):
        if bond:
            jumps = _bond_sweep(occ, p, pt, uniforms[t])
        else:
            jumps = _chip_sweep(occ, p, pt, uniforms[t], fronts, sizes)
        if measure:
            total += jumps
            for i in range(L):
                if occ[i] == 1:
                    dens_acc[i] += 1
                    for r in range(L - 1):
                        if occ[(i + 1 + r) % L] == 1:
                            corr_acc[r] += 1
            hist_acc[_cluster_count(occ)] += 1
    jumps_acc[0] += total


@numba.njit(cache=True, nogil=True)
def _advance_sampling(occ, p, pt, uniforms, bond, thin, weights, counts):
    """Sweep and tally the configuration code every ``thin`` sweeps."""
    L = occ.shape[0]
    fronts = np.empty(L, np.int64)
    sizes = np.empty(L, np.int64)
    for t in range(uniforms.shape[0]):
        if bond:
            _bond_sweep(occ, p, pt, uniforms[t])
        else:
            _chip_sweep(occ, p, pt, uniforms[t], fronts, sizes)
        if (t + 1) % thin == 0:
            code = 0
            for i in range(L):
                code += occ[i] * weights[i]
            counts[code] += 1


# ---------------------------------------------------------------------------
# drivers


def _uniform_width(L: int, N: int, dynamics: str) -> int:
    if dynamics == "bond":
        return max(N, 1)
    return max(min(N, L - N), 1)


def make_generators(seed: int, replicas: int) -> list[np.random.Generator]:
    """Independent Philox streams, one per replica, split from ``seed``."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(replicas)]


def initial_occupancy(L: int, N: int, initial: InitialCondition, rng) -> np.ndarray:
    occ = np.zeros(L, np.int64)
    initial = InitialCondition(initial)
    if initial is InitialCondition.SINGLE_CLUSTER:
        occ[:N] = 1
    elif initial is InitialCondition.ALTERNATING:
        occ[[(i * L) // N for i in range(N)]] = 1
    else:
        occ[rng.permutation(L)[:N]] = 1
    return occ


def _thread_count(n_jobs: int) -> int:
    try:
        wanted = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        wanted = 1
    return max(1, min(wanted, n_jobs))


def _map_replicas(fn, items):
    workers = _thread_count(len(items))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _sweep_chunks(rng, occ, p, pt, sweeps, width, bond, measure, acc):
    done = 0
    while done < sweeps:
        n = min(CHUNK_SWEEPS, sweeps - done)
        u = rng.random((n, width))
        _advance(occ, p, pt, u, bond, measure, *acc)
        done += n


@dataclass
class _ReplicaResult:
    jumps: np.ndarray  # per batch
    dens: np.ndarray  # batch x L
    corr: np.ndarray  # batch x (L-1)
    hist: np.ndarray  # batch x (kmax+1)
    lengths: np.ndarray  # sweeps per batch


def _run_replica(sim: SimConfig, rng) -> _ReplicaResult:
    L, N = sim.L, sim.N
    p, pt = (float(v) for v in sim.params.require_rates())
    bond = sim.dynamics == "bond"
    width = _uniform_width(L, N, sim.dynamics)
    occ = initial_occupancy(L, N, sim.initial, rng)
    kmax = min(N, L - N) if 0 < N < L else 1
    B = min(sim.batches, sim.measure_sweeps)
    bounds = [(b * sim.measure_sweeps) // B for b in range(B + 1)]
    res = _ReplicaResult(
        np.zeros(B, np.int64),
        np.zeros((B, L), np.int64),
        np.zeros((B, L - 1), np.int64),
        np.zeros((B, kmax + 1), np.int64),
        np.diff(np.array(bounds, np.int64)),
    )
    scratch = (np.zeros(1, np.int64), np.zeros(L, np.int64), np.zeros(L - 1, np.int64), np.zeros(kmax + 1, np.int64))
    if 0 < N < L:
        _sweep_chunks(rng, occ, p, pt, sim.burn_in, width, bond, False, scratch)
    for b in range(B):
        acc = (np.zeros(1, np.int64), res.dens[b], res.corr[b], res.hist[b])
        if 0 < N < L:
            _sweep_chunks(rng, occ, p, pt, int(res.lengths[b]), width, bond, True, acc)
        else:
            acc[1][:] = occ * res.lengths[b]
            acc[2][:] = [int(np.dot(occ, np.roll(occ, -(r + 1)))) * res.lengths[b] for r in range(L - 1)]
            acc[3][0 if N == 0 else 1] = res.lengths[b]
        res.jumps[b] = acc[0][0]
    return res


def _batch_stats(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over the leading (batch) axis."""
    n = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


@dataclass
class MeasurementRecord:
    """Pooled estimates with batch-means standard errors."""

    sim: SimConfig
    current: float
    current_stderr: float
    density: np.ndarray
    density_stderr: np.ndarray
    pair_correlation: np.ndarray
    pair_correlation_stderr: np.ndarray
    cluster_hist: np.ndarray
    cluster_hist_stderr: np.ndarray
    sweeps: int
    streams: list[int] = field(default_factory=list)

    def metadata(self) -> list[tuple[str, str]]:
        s = self.sim
        return [
            ("L", str(s.L)),
            ("N", str(s.N)),
            ("p", str(s.params.p)),
            ("pt", str(s.params.p_tilde)),
            ("dynamics", s.dynamics),
            ("burn_in_sweeps", str(s.burn_in)),
            ("measure_sweeps", str(s.measure_sweeps)),
            ("replicas", str(s.replicas)),
            ("batches", str(s.batches)),
            ("initial", s.initial.value),
            ("seed", str(s.seed)),
            ("streams", " ".join(str(i) for i in self.streams)),
            ("rng", "Philox via SeedSequence.spawn"),
            ("sweeps_counted", str(self.sweeps)),
        ]

    def rows(self):
        yield "current", 0, self.current, self.current_stderr
        for i, (v, e) in enumerate(zip(self.density, self.density_stderr), start=1):
            yield "density", i, v, e
        for r, (v, e) in enumerate(zip(self.pair_correlation, self.pair_correlation_stderr)):
            yield "pair_correlation", r, v, e
        for k, (v, e) in enumerate(zip(self.cluster_hist, self.cluster_hist_stderr)):
            yield "cluster_hist", k, v, e

    def to_csv(self, extra_meta: list[tuple[str, str]] | None = None) -> str:
        lines = [f"# {k}={v}" for k, v in (extra_meta or []) + self.metadata()]
        lines.append("observable,index,value,stderr")
        lines += [f"{o},{i},{float(v)!r},{float(e)!r}" for o, i, v, e in self.rows()]
        return "\n".join(lines) + "\n"


def run(sim: SimConfig) -> MeasurementRecord:
    """Burn in, measure, and pool all replicas' batch means."""
    gens = make_generators(sim.seed, sim.replicas)
    parts = _map_replicas(lambda g: _run_replica(sim, g), gens)
    L = sim.L
    lengths = np.concatenate([r.lengths for r in parts]).astype(float)
    jumps = np.concatenate([r.jumps for r in parts]) / (L * lengths)
    dens = np.concatenate([r.dens for r in parts]) / lengths[:, None]
    corr = np.concatenate([r.corr for r in parts]) / (L * lengths[:, None])
    hist = np.concatenate([r.hist for r in parts]) / lengths[:, None]
    cur, cur_se = _batch_stats(jumps)
    d, d_se = _batch_stats(dens)
    g, g_se = _batch_stats(corr)
    h, h_se = _batch_stats(hist)
    return MeasurementRecord(
        sim, float(cur), float(cur_se), d, d_se, g, g_se, h, h_se,
        int(lengths.sum()), list(range(sim.replicas)),
    )


def estimate_cluster_histogram(record: MeasurementRecord) -> dict[int, float]:
    """Empirical ``P(k)`` over cluster counts ``k >= 1``."""
    return {k: float(v) for k, v in enumerate(record.cluster_hist) if k >= 1}


def sample_configurations(L: int, N: int, params: ModelParams, sweeps: int, seed: int = 0,
                          dynamics: Dynamics = "chip", thin: int = 1,
                          burn_in: int | None = None,
                          initial: InitialCondition = InitialCondition.UNIFORM_RANDOM) -> dict[int, int]:
    """Visit counts per configuration (keyed by occupancy bits) every ``thin`` sweeps."""
    if L > 20:
        raise DomainError("configuration histograms are limited to L <= 20")
    if not 0 < N < L:
        raise DomainError("need 0 < N < L")
    p, pt = (float(v) for v in params.require_rates())
    rng = make_generators(seed, 1)[0]
    occ = initial_occupancy(L, N, initial, rng)
    width = _uniform_width(L, N, dynamics)
    bond = dynamics == "bond"
    burn = 10 * L if burn_in is None else burn_in
    scratch = (np.zeros(1, np.int64), np.zeros(L, np.int64), np.zeros(L - 1, np.int64),
               np.zeros(L + 1, np.int64))
    _sweep_chunks(rng, occ, p, pt, burn, width, bond, False, scratch)
    weights = 1 << np.arange(L, dtype=np.int64)
    counts = np.zeros(1 << L, np.int64)
    done = 0
    per = CHUNK_SWEEPS - CHUNK_SWEEPS % thin
    while done < sweeps:
        n = min(per, sweeps - done)
        _advance_sampling(occ, p, pt, rng.random((n, width)), bond, thin, weights, counts)
        done += n
    return {int(c): int(v) for c, v in enumerate(counts) if v}
