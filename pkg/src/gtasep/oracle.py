"""Brute-force ground truth for small rings.

Every configuration of the ``N``-particle sector is enumerated, the one-sweep
transition matrix of the cluster-chipping dynamics is built entry by entry in
exact rationals, and the stationary vector is found by Gaussian elimination.
Nothing here relies on the weight law or on any closed-form result.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import comb
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    DomainError,
    GtasepError,
    ModelParams,
    RingConfig,
    cluster_count,
    decompose,
    rotate,
    to_scalar,
)

MAX_STATES = 1000


class ReducibleChainError(GtasepError):
    """The chain has more than one closed communicating class."""

    def __init__(self, message: str, classes):
        super().__init__(message)
        self.classes = classes


class SizeCapError(GtasepError, ValueError):
    """The sector is too large for dense brute-force treatment."""


def enumerate_configs(L: int, N: int) -> list[RingConfig]:
    """All ``comb(L, N)`` configurations, ordered lexicographically by occupancy tuple."""
    if L < 1 or not 0 <= N <= L:
        raise DomainError("need 0 <= N <= L and L >= 1")
    configs = [RingConfig.from_sites(L, (s + 1 for s in sites)) for sites in combinations(range(L), N)]
    # combinations yields increasing site sets; occupancy tuples sort the opposite way
    configs.sort(key=lambda c: c.occupancy)
    return configs


def chip_distribution(n: int, p, p_tilde) -> list[Fraction]:
    """Probabilities of chipping ``m = 0..n`` leading particles off an ``n``-cluster."""
    p, pt = to_scalar(p), to_scalar(p_tilde)
    if n < 1:
        raise DomainError("a cluster has at least one particle")
    out = [1 - p]
    for m in range(1, n):
        out.append(p * pt ** (m - 1) * (1 - pt))
    out.append(p * pt ** (n - 1))
    return out


def _chip_images(config: RingConfig, params: ModelParams):
    """Yield ``(image_bits, probability, jumps)`` over all chip vectors of ``config``."""
    p, pt = params.require_rates()
    L = config.L
    dec = decompose(config)
    if dec.k == 0 or config.N == L:
        yield config.bits, Fraction(1), 0
        return
    laws = [chip_distribution(n, p, pt) for n in dec.sizes]
    for chips in product(*(range(n + 1) for n in dec.sizes)):
        prob = Fraction(1)
        for law, m in zip(laws, chips):
            prob *= law[m]
        if prob == 0:
            continue
        bits = config.bits
        for (start, n), m in zip(dec.clusters, chips):
            if m:
                front = (start - 1 + n - 1) % L
                bits &= ~(1 << ((front - m + 1) % L))
                bits |= 1 << ((front + 1) % L)
        yield bits, prob, sum(chips)


@dataclass
class TransitionMatrix:
    """Sparse exact one-sweep transition matrix; ``rows[i]`` maps target index to probability."""

    L: int
    N: int
    params: ModelParams
    configs: list[RingConfig]
    rows: list[dict[int, Fraction]]

    @property
    def dim(self) -> int:
        return len(self.configs)

    def index(self, config: RingConfig) -> int:
        return self._lookup[config.bits]

    def __post_init__(self):
        self._lookup = {c.bits: i for i, c in enumerate(self.configs)}

    def entry(self, i: int, j: int) -> Fraction:
        return self.rows[i].get(j, Fraction(0))

    def row_sums(self) -> list[Fraction]:
        return [sum(r.values(), Fraction(0)) for r in self.rows]

    def is_stochastic(self) -> bool:
        return all(s == 1 for s in self.row_sums()) and all(
            v >= 0 for r in self.rows for v in r.values()
        )

    def is_translation_covariant(self) -> bool:
        """``P(C -> C') == P(rot C -> rot C')`` for a one-site rotation."""
        for i, c in enumerate(self.configs):
            ri = self.index(rotate(c, 1))
            for j, v in self.rows[i].items():
                if self.entry(ri, self.index(rotate(self.configs[j], 1))) != v:
                    return False
        return True

    def dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.dim for _ in range(self.dim)]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i][j] = v
        return out


def transition_matrix(L: int, N: int, params: ModelParams, max_states: int = MAX_STATES) -> TransitionMatrix:
    """Exact transition matrix of one chipping sweep; image collisions are summed."""
    if not params.exact:
        raise DomainError("the oracle works over exact rationals")
    params.require_rates()
    if comb(L, N) > max_states:
        raise SizeCapError(f"comb({L}, {N}) = {comb(L, N)} states exceeds the cap of {max_states}")
    configs = enumerate_configs(L, N)
    lookup = {c.bits: i for i, c in enumerate(configs)}
    rows = []
    for c in configs:
        row: dict[int, Fraction] = {}
        for bits, prob, _ in _chip_images(c, params):
            j = lookup[bits]
            row[j] = row.get(j, Fraction(0)) + prob
        rows.append(row)
    return TransitionMatrix(L, N, params, configs, rows)


@dataclass
class StationaryVector:
    configs: list[RingConfig]
    probs: list[Fraction]
    params: ModelParams

    @property
    def L(self) -> int:
        return self.configs[0].L

    @property
    def N(self) -> int:
        return self.configs[0].N

    def __getitem__(self, config: RingConfig) -> Fraction:
        for c, v in zip(self.configs, self.probs):
            if c.bits == config.bits:
                return v
        raise KeyError(str(config))

    def weight_law_reference(self) -> list[Fraction]:
        """``x^k / Z`` per configuration, or its limit at ``x = 0`` and ``p = 1``.

        At ``p = 1`` (``x -> infinity``) only configurations with the largest
        cluster count survive, each with equal probability.
        """
        ks = [cluster_count(c) for c in self.configs]
        if self.params.has_rates and self.params.p == 1:
            kmax = max(ks)
            hits = ks.count(kmax)
            return [Fraction(1, hits) if k == kmax else Fraction(0) for k in ks]
        x = self.params.x
        if x == 0:
            # x -> 0: only the fewest-cluster configurations survive
            kmin = min(ks)
            hits = ks.count(kmin)
            return [Fraction(1, hits) if k == kmin else Fraction(0) for k in ks]
        w = [Fraction(x) ** k for k in ks]
        Z = sum(w, Fraction(0))
        return [v / Z for v in w]

    def residuals(self) -> list[Fraction]:
        return [a - b for a, b in zip(self.probs, self.weight_law_reference())]

    def satisfies_weight_law(self) -> bool:
        return all(r == 0 for r in self.residuals())


def _closed_classes(tm: TransitionMatrix) -> list[list[int]]:
    n = tm.dim
    ii, jj = [], []
    for i, r in enumerate(tm.rows):
        for j, v in r.items():
            if v:
                ii.append(i)
                jj.append(j)
    graph = csr_matrix((np.ones(len(ii), dtype=np.int8), (ii, jj)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection="strong")
    leaves = set(labels.tolist())
    for i, j in zip(ii, jj):
        if labels[i] != labels[j]:
            leaves.discard(labels[i])
    return [[i for i in range(n) if labels[i] == lab] for lab in sorted(leaves)]


def _solve_stationary(tm: TransitionMatrix, states: Sequence[int]) -> list[Fraction]:
    """Gaussian elimination for ``pi P = pi`` restricted to a closed class."""
    pos = {s: a for a, s in enumerate(states)}
    n = len(states)
    # Row a of the system is the balance equation of state a, as a sparse dict.
    system = [dict() for _ in range(n)]
    for s in states:
        for t, v in tm.rows[s].items():
            row = system[pos[t]]
            row[pos[s]] = row.get(pos[s], Fraction(0)) + v
    for a in range(n):
        system[a][a] = system[a].get(a, Fraction(0)) - 1
    rhs = [Fraction(0)] * n
    # Replace the last balance equation with the normalisation.
    system[-1] = {a: Fraction(1) for a in range(n)}
    rhs[-1] = Fraction(1)
    # forward elimination, pivoting on the sparsest available row to limit fill-in
    order = []
    remaining = set(range(n))
    for col in range(n):
        cands = [r for r in remaining if system[r].get(col)]
        if not cands:
            raise ArithmeticError("singular stationary system")
        piv = min(cands, key=lambda r: (len(system[r]), r))
        remaining.discard(piv)
        order.append(piv)
        prow, pval = system[piv], system[piv][col]
        for r in cands:
            if r == piv:
                continue
            row = system[r]
            f = row[col] / pval
            for c, v in prow.items():
                nv = row.get(c, Fraction(0)) - f * v
                if nv:
                    row[c] = nv
                else:
                    row.pop(c, None)
            rhs[r] -= f * rhs[piv]
    sol = [Fraction(0)] * n
    for col in range(n - 1, -1, -1):
        r = order[col]
        acc = rhs[r] - sum((v * sol[c] for c, v in system[r].items() if c > col), Fraction(0))
        sol[col] = acc / system[r][col]
    return sol


def stationary_distribution(tm: TransitionMatrix) -> StationaryVector:
    """Exact stationary vector; transient states get probability zero."""
    classes = _closed_classes(tm)
    if len(classes) != 1:
        stranded = [[str(tm.configs[i]) for i in cls] for cls in classes]
        preview = "; ".join(",".join(c[:4]) + (",..." if len(c) > 4 else "") for c in stranded[:4])
        raise ReducibleChainError(
            f"chain has {len(classes)} closed classes, stationary state not unique: {preview}",
            stranded,
        )
    states = classes[0]
    sol = _solve_stationary(tm, states)
    probs = [Fraction(0)] * tm.dim
    for s, v in zip(states, sol):
        probs[s] = v
    return StationaryVector(tm.configs, probs, tm.params)


def stationary(L: int, N: int, params: ModelParams) -> StationaryVector:
    return stationary_distribution(transition_matrix(L, N, params))


@dataclass
class OracleObservables:
    current: Fraction
    density: list[Fraction]
    pair_correlation: list[Fraction]


def oracle_observables(pi: StationaryVector, params: ModelParams) -> OracleObservables:
    """Current, density profile and pair correlations as plain expectations under ``pi``."""
    p, pt = params.require_rates()
    L, N = pi.L, pi.N
    flux_cache: dict[int, Fraction] = {}

    def flux(n: int) -> Fraction:
        if n not in flux_cache:
            flux_cache[n] = sum((m * q for m, q in enumerate(chip_distribution(n, p, pt))), Fraction(0))
        return flux_cache[n]

    cur = Fraction(0)
    dens = [Fraction(0)] * L
    corr = [Fraction(0)] * max(L - 1, 0)
    for c, w in zip(pi.configs, pi.probs):
        if not w:
            continue
        occ = c.occupancy
        if 0 < N < L:
            cur += w * sum(flux(n) for n in decompose(c).sizes)
        for i in range(L):
            dens[i] += w * occ[i]
        for r in range(L - 1):
            hits = sum(occ[i] * occ[(i + 1 + r) % L] for i in range(L))
            corr[r] += w * Fraction(hits, L)
    return OracleObservables(cur / L, dens, corr)


def audit_csv(pi: StationaryVector) -> str:
    """Per-configuration audit table: word, cluster count, pi, weight-law value, residual."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "k", "pi", "weight_law", "residual"])
    for c, v, ref in zip(pi.configs, pi.probs, pi.weight_law_reference()):
        w.writerow([c.to_word(), cluster_count(c), v, ref, v - ref])
    return buf.getvalue()
