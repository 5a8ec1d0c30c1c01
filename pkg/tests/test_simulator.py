from fractions import Fraction

import numpy as np
import pytest

from gtasep import exact, oracle, simulator as sim
from gtasep.core import DomainError, ModelParams, RingConfig, decompose

F = Fraction
P = ModelParams(F(1, 2), F(3, 4))


def test_chip_length_thresholds():
    # the inverse CDF maps v = 1 - u onto the chip law exactly
    p, pt, n = 0.5, 0.25, 2
    law = [float(v) for v in oracle.chip_distribution(n, F(1, 2), F(1, 4))]
    cdf_tail = np.cumsum(law[::-1])[::-1]  # P(m >= j)
    for j in range(1, n + 1):
        thr = cdf_tail[j]
        eps = 1e-12
        assert sim._chip_length(1 - (thr - eps), n, p, pt) >= j
        assert sim._chip_length(1 - (thr + eps), n, p, pt) < j
    assert sim._chip_length(0.0, 3, 1.0, 1.0) == 3
    assert sim._chip_length(0.999, 3, 0.0, 0.5) == 0


def test_chip_law_frequencies():
    rng = np.random.default_rng(3)
    u = rng.random(200_000)
    m = np.array([sim._chip_length(v, 2, 0.5, 0.25) for v in u])
    freq = np.bincount(m, minlength=3) / len(m)
    assert np.allclose(freq, [0.5, 0.375, 0.125], atol=4e-3)
    assert m.mean() == pytest.approx(float(exact.cluster_flux(2, ModelParams(F(1, 2), F(1, 4)))), abs=5e-3)


def test_step_edge_cases():
    rng = np.random.default_rng(0)
    full = RingConfig.from_word("DDDD")
    assert sim.step(full, P, rng) == (full, 0)
    empty = RingConfig.from_word("EEEE")
    assert sim.step(empty, P, rng) == (empty, 0)
    assert sim.bond_sweep_step(full, P, rng) == (full, 0)


def test_rigid_moves_at_unit_follow_rate():
    rng = np.random.default_rng(1)
    c = RingConfig.from_word("DDDEEDDEEE")
    rigid = ModelParams(F(1, 2), F(1))
    for _ in range(200):
        new, jumps = sim.step(c, rigid, rng)
        assert jumps in (0, 2, 3, 5)
        assert sorted(decompose(new).sizes) == sorted(decompose(c).sizes)
        assert sim.bond_sweep_step(c, rigid, rng)[1] in (0, 2, 3, 5)


def test_bond_rules_single_particle():
    rng = np.random.default_rng(2)
    c = RingConfig.from_word("DEEEE")
    hops = sum(sim.bond_sweep_step(c, ModelParams(F(3, 10), F(0)), rng)[1] for _ in range(20_000))
    assert hops / 20_000 == pytest.approx(0.3, abs=0.015)


def test_bond_follow_up_uses_p_tilde():
    # the second particle of a pair follows with probability p_tilde only if the first left
    rng = np.random.default_rng(4)
    c = RingConfig.from_word("DDEEEE")
    both = 0
    for _ in range(20_000):
        _, j = sim.bond_sweep_step(c, ModelParams(F(1, 2), F(1, 5)), rng)
        both += j == 2
    assert both / 20_000 == pytest.approx(0.1, abs=0.008)


@pytest.mark.parametrize("dynamics", ["chip", "bond"])
def test_python_and_compiled_agree(dynamics):
    rng = np.random.default_rng(11)
    fn = sim.step if dynamics == "chip" else sim.bond_sweep_step
    for _ in range(400):
        L = int(rng.integers(2, 14))
        N = int(rng.integers(1, L))
        p, pt = float(rng.random()), float(rng.random())
        params = ModelParams(p, pt)
        occ = sim.initial_occupancy(L, N, "uniform-random", rng)
        c = RingConfig.from_occupancy([int(v) for v in occ])
        seed = int(rng.integers(1 << 31))
        new, jumps = fn(c, params, np.random.default_rng(seed))
        u = np.random.default_rng(seed).random(sim._uniform_width(L, N, dynamics))
        o = occ.copy()
        if dynamics == "chip":
            j2 = sim._chip_sweep(o, p, pt, u, np.empty(L, np.int64), np.empty(L, np.int64))
        else:
            j2 = sim._bond_sweep(o, p, pt, u)
        assert jumps == j2 and tuple(int(v) for v in o) == new.occupancy


def test_mean_jumps_per_cluster_size():
    rng = np.random.default_rng(5)
    params = ModelParams(F(2, 3), F(1, 2))
    c = RingConfig.from_word("DDDEEDEE")  # clusters of size 3 and 1
    total = 0
    sweeps = 40_000
    for _ in range(sweeps):
        total += sim.step(c, params, rng)[1]
    expected = float(exact.cluster_flux(3, params) + exact.cluster_flux(1, params))
    assert total / sweeps == pytest.approx(expected, abs=0.02)


def test_initial_conditions():
    rng = np.random.default_rng(0)
    assert list(sim.initial_occupancy(6, 3, "single-cluster", rng)) == [1, 1, 1, 0, 0, 0]
    assert list(sim.initial_occupancy(6, 3, "alternating", rng)) == [1, 0, 1, 0, 1, 0]
    occ = sim.initial_occupancy(10, 4, "uniform-random", rng)
    assert occ.sum() == 4


def test_sim_config_validation():
    with pytest.raises(DomainError):
        sim.SimConfig(10, 4, P, 0)
    with pytest.raises(DomainError):
        sim.SimConfig(10, 4, P, 10, burn_in_sweeps=-1)
    with pytest.raises(DomainError):
        sim.SimConfig(10, 4, ModelParams.from_x(2), 10)
    assert sim.SimConfig(10, 4, P, 10).burn_in == 100


def test_run_record_invariants():
    rec = sim.run(sim.SimConfig(12, 5, P, 20_000, seed=3, replicas=2))
    assert rec.sweeps == 40_000
    assert rec.density.mean() == pytest.approx(5 / 12, abs=1e-12)
    assert np.all((rec.pair_correlation >= 0) & (rec.pair_correlation <= 1))
    hist = sim.estimate_cluster_histogram(rec)
    assert sum(hist.values()) == pytest.approx(1)
    assert set(hist) == {1, 2, 3, 4, 5}


def test_run_against_exact_small_ring():
    params = ModelParams(F(1, 2), F(1, 4))
    rec = sim.run(sim.SimConfig(6, 4, params, 200_000, seed=9))
    assert abs(rec.current - float(exact.current(6, 4, params))) < 4 * rec.current_stderr
    # cluster-count histogram converges to count * x^k / Z
    x = 1.5
    Z = 6 * x + 9 * x**2
    hist = sim.estimate_cluster_histogram(rec)
    for k, w in ((1, 6 * x / Z), (2, 9 * x**2 / Z)):
        assert abs(hist[k] - w) < 4 * rec.cluster_hist_stderr[k] + 1e-3


def test_flat_correlations_at_equal_rates():
    params = ModelParams(F(2, 5), F(2, 5))
    rec = sim.run(sim.SimConfig(24, 9, params, 100_000, seed=21))
    z = (rec.pair_correlation - 3 / 23) / rec.pair_correlation_stderr
    assert np.max(np.abs(z)) < 4.5


def test_anticorrelation_wings_parallel_update():
    rec = sim.run(sim.SimConfig(24, 9, ModelParams(F(10, 11), F(0)), 50_000, seed=8))
    assert rec.pair_correlation[0] < rec.pair_correlation[11]


def test_cluster_histogram_at_unit_x():
    rec = sim.run(sim.SimConfig(6, 4, ModelParams(F(1, 3), F(1, 3)), 100_000, seed=2))
    hist = sim.estimate_cluster_histogram(rec)
    assert hist[1] == pytest.approx(6 / 15, abs=0.01)
    assert hist[2] == pytest.approx(9 / 15, abs=0.01)


def test_aggregation_single_cluster():
    rec = sim.run(sim.SimConfig(6, 4, ModelParams(F(1, 2), F(1)), 2_000, seed=2, initial="single-cluster"))
    assert sim.estimate_cluster_histogram(rec)[1] == 1


def test_reproducible_and_thread_independent(monkeypatch):
    cfg = sim.SimConfig(16, 7, P, 5_000, seed=123, replicas=3)
    a = sim.run(cfg).to_csv()
    b = sim.run(cfg).to_csv()
    monkeypatch.setenv(sim.THREADS_ENV, "3")
    c = sim.run(cfg).to_csv()
    assert a == b == c
    other = sim.run(sim.SimConfig(16, 7, P, 5_000, seed=124, replicas=3)).to_csv()
    assert other != a


def test_burn_in_doubling_is_stable():
    base = dict(L=24, N=12, params=P, measure_sweeps=100_000, initial="single-cluster")
    r1 = sim.run(sim.SimConfig(**base, burn_in_sweeps=240, seed=1))
    r2 = sim.run(sim.SimConfig(**base, burn_in_sweeps=480, seed=2))
    se = np.hypot(r1.current_stderr, r2.current_stderr)
    assert abs(r1.current - r2.current) < 4 * se


def test_csv_layout():
    rec = sim.run(sim.SimConfig(6, 3, P, 1_000, seed=1))
    lines = rec.to_csv().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert any(l == "# seed=1" for l in meta)
    assert body[0] == "observable,index,value,stderr"
    kinds = [l.split(",")[0] for l in body[1:]]
    assert kinds.count("current") == 1 and kinds.count("density") == 6
    assert kinds.count("pair_correlation") == 5


def test_degenerate_fillings():
    rec = sim.run(sim.SimConfig(5, 5, P, 100, seed=1))
    assert rec.current == 0 and np.all(rec.density == 1)
    rec = sim.run(sim.SimConfig(5, 0, P, 100, seed=1))
    assert rec.current == 0 and np.all(rec.density == 0)


def test_sample_configurations_counts():
    counts = sim.sample_configurations(6, 3, P, 6_000, seed=3, thin=6)
    assert sum(counts.values()) == 1_000
    assert all(RingConfig(6, b).N == 3 for b in counts)
