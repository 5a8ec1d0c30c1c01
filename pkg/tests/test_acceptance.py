"""Acceptance gate: one test (or group) per criterion, at the stated tolerances."""

import random
import time
from fractions import Fraction
from itertools import product
from math import comb, sqrt

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from gtasep import cli, exact, mpa, oracle, simulator
from gtasep.core import ModelParams, cluster_count

F = Fraction
crit = pytest.mark.criterion


# 1 -------------------------------------------------------------------------

@crit(1, "golden partition functions, bit-exact, < 1 ms each")
@pytest.mark.parametrize("L,N,coeffs", [
    (6, 4, (0, 6, 9)),
    (7, 4, (0, 7, 21, 7)),
    (9, 5, (0, 9, 54, 54, 9)),
])
def test_c01_golden_partition_functions(L, N, coeffs):
    exact.partition_poly_x.cache_clear()
    t0 = time.perf_counter()
    poly = exact.partition_poly_x(L, N)
    elapsed = time.perf_counter() - t0
    assert poly.coeffs == coeffs
    assert elapsed < 1e-3


# 2 -------------------------------------------------------------------------

@crit(2, "cluster-sum, nu-polynomial and matrix-trace partition functions agree, L <= 14, < 10 s")
def test_c02_triple_route_agreement():
    grid = [F(i, 6) for i in range(1, 6)]
    exact.partition_poly_x.cache_clear()
    exact.partition_poly_nu.cache_clear()
    t0 = time.perf_counter()
    checked = 0
    for p, pt in product(grid, grid):
        params = ModelParams(p, pt)
        x = params.x
        for L in range(2, 15):
            for N in range(1, L):
                a = exact.partition_poly_x(L, N).evaluate(x)
                b = exact.partition_poly_nu(L, N).evaluate(1 - x)
                c = mpa.grand_canonical_Z(L, N, params)
                assert a == b == c, (L, N, p, pt)
                checked += 1
    assert checked == 25 * 91
    assert time.perf_counter() - t0 < 10


# 3 -------------------------------------------------------------------------

@crit(3, "oracle stationary vector equals x^k / Z bit-exactly, < 60 s")
def test_c03_weight_law_certification():
    t0 = time.perf_counter()
    for L, N in ((4, 2), (5, 2), (6, 3), (6, 4), (7, 4), (8, 4)):
        for p, pt in ((F(1, 2), F(1, 4)), (F(1, 2), F(1, 2)), (F(1, 2), F(3, 4)), (F(10, 11), F(0))):
            params = ModelParams(p, pt)
            tm = oracle.transition_matrix(L, N, params)
            assert tm.is_stochastic()
            pi = oracle.stationary_distribution(tm)
            x = params.x
            Z = sum(x ** cluster_count(c) for c in pi.configs)
            for c, v in zip(pi.configs, pi.probs):
                assert v == x ** cluster_count(c) / Z, (L, N, p, pt, c)
    assert time.perf_counter() - t0 < 60


# 4 -------------------------------------------------------------------------

@crit(4, "current: closed form = matrix trace = oracle, L <= 8; spot value 49/240")
def test_c04_current_consistency():
    for p, pt in ((F(1, 2), F(1, 2)), (F(1, 2), F(1, 4)), (F(1, 3), F(4, 5)), (F(7, 8), F(0))):
        params = ModelParams(p, pt)
        for L in range(2, 9):
            for N in range(1, L):
                a = exact.current(L, N, params)
                b = mpa.mpa_current(L, N, params)
                c = oracle.oracle_observables(oracle.stationary(L, N, params), params).current
                assert a == b == c, (L, N, p, pt)
    half = ModelParams(F(1, 2), F(1, 2))
    assert exact.current(6, 4, half) == F(49, 240)
    # literal 6-4 current formula and the equal-rate single sum
    p = q = F(1, 2)
    x = (1 - q) / (1 - p)
    lit = p / (6 * x + 9 * x**2) * ((1 + q + q**2 + q**3) * x + (3 + 2 * q + q**2) * x**2)
    equal_rates = p * F(4 * 2, 6 * 5) * (1 + sum(F(comb(6 - 2 - k, 4 - 1 - k), comb(4, 3)) * p**k for k in range(1, 4)))
    assert lit == equal_rates == F(49, 240)


# 5 -------------------------------------------------------------------------

def _current_6_4(p, q):
    x = (1 - q) / (1 - p)
    Z = 6 * x + 9 * x**2
    return p / Z * ((1 + q + q**2 + q**3) * x + (3 + 2 * q + q**2) * x**2)


def _current_7_4(p, q):
    x = (1 - q) / (1 - p)
    Z = 7 * (x + 3 * x**2 + x**3)
    return p / Z * ((1 + q + q**2 + q**3) * x + 2 * (3 + 2 * q + q**2) * x**2 + (3 + q) * x**3)


def _current_9_5(p, q):
    x = (1 - q) / (1 - p)
    Z = 9 * (x + 6 * x**2 + 6 * x**3 + x**4)
    return p / Z * ((1 + q + q**2 + q**3 + q**4) * x + 3 * (4 + 3 * q + 2 * q**2 + q**3) * x**2
                    + 3 * (6 + 3 * q + q**2) * x**3 + (4 + q) * x**4)


@crit(5, "literal small-ring current formulas equal exact.current at 20 random points each")
@pytest.mark.parametrize("L,N,formula", [(6, 4, _current_6_4), (7, 4, _current_7_4), (9, 5, _current_9_5)])
def test_c05_small_ring_current_formulas(L, N, formula):
    rng = random.Random(1000 * L + N)
    for _ in range(20):
        den = rng.randint(2, 40)
        p = F(rng.randint(1, den - 1), den)
        q = F(rng.randint(0, den - 1), rng.choice([den, den + 1, 2 * den]))
        assert formula(p, q) == exact.current(L, N, ModelParams(p, q)), (p, q)


# 6 -------------------------------------------------------------------------

@crit(6, "pair correlation: flat at nu=0, aggregation limit, flat bottom, reflection")
def test_c06a_flat_at_nu_zero():
    P = ModelParams.from_nu(0)
    for L in range(2, 25):
        for N in range(2, L + 1):
            for r in range(L - 1):
                assert exact.pair_correlation(L, N, r, P).value == F(N * (N - 1), L * (L - 1))


@crit(6, "pair correlation: flat at nu=0, aggregation limit, flat bottom, reflection")
def test_c06b_aggregation_limit():
    L, N = 24, 9
    P = ModelParams.from_x(0)
    values = exact.pair_correlation_profile(L, N, P)

    def piecewise(r):
        v = F(0)
        if r <= N - 2:
            v += F(N - 1 - r, L)
        if r >= L - N:
            v += F(r - (L - N) + 1, L)
        return v

    assert values == [piecewise(r) for r in range(L - 1)]
    assert values[0] == F(1, 3) and values[7] == F(1, 24) and values[10] == 0


@crit(6, "pair correlation: flat at nu=0, aggregation limit, flat bottom, reflection")
def test_c06c_flat_bottom():
    L, N = 24, 14
    P = ModelParams.from_x(0)
    for r in range(L - N - 1, N):
        assert exact.pair_correlation(L, N, r, P).value == F(2 * N - L, L)


@crit(6, "pair correlation: flat at nu=0, aggregation limit, flat bottom, reflection")
def test_c06d_reflection_symmetry():
    for x in (F(0), F(1, 3), F(1), F(5, 2), F(11)):
        P = ModelParams.from_x(x)
        for L in range(3, 25):
            for N in range(2, L):
                F_ = exact.pair_correlation_profile(L, N, P)
                assert F_ == F_[::-1], (L, N, x)


# 7 -------------------------------------------------------------------------

@crit(7, "density identities as exact nu-polynomials, 1 <= N <= L <= 40, < 30 s")
def test_c07_density_identities():
    exact.partition_poly_nu.cache_clear()
    t0 = time.perf_counter()
    for L in range(1, 41):
        for N in range(1, L + 1):
            report = exact.density_identity_report(L, N)
            assert all(report.values()), (L, N, report)
    assert time.perf_counter() - t0 < 30


# 8 -------------------------------------------------------------------------

@crit(8, "simulation vs exact at (24,12,1/2,3/4): 3 sigma, stderr(J) <= 5e-4, <= 2 min")
def test_c08_simulation_vs_exact(monkeypatch):
    monkeypatch.delenv(simulator.THREADS_ENV, raising=False)
    L, N = 24, 12
    params = ModelParams(F(1, 2), F(3, 4))
    t0 = time.perf_counter()
    rec = simulator.run(simulator.SimConfig(L, N, params, 10**6, seed=20240601))
    elapsed = time.perf_counter() - t0
    J = float(exact.current(L, N, params))
    assert rec.current_stderr <= 5e-4
    assert abs(rec.current - J) <= 3 * rec.current_stderr
    for r in (0, 5, 11):
        G = float(exact.pair_correlation(L, N, r, params).value)
        assert abs(rec.pair_correlation[r] - G) <= 3 * rec.pair_correlation_stderr[r], r
    assert elapsed <= 120


# 9 -------------------------------------------------------------------------

@crit(9, "L = 2000 currents within 2e-3 of the infinite-ring formulas")
@pytest.mark.parametrize("rho,p,pt,update", [
    (F(3, 10), F(1, 2), F(1, 2), "backward"),
    (F(1, 2), F(1, 2), F(0), "parallel"),
])
def test_c09_thermodynamic_limits(rho, p, pt, update):
    L = 2000
    N = int(rho * L)
    J = exact.current(L, N, ModelParams(p, pt))
    ref = exact.thermo_current_reference(float(rho), float(p), update)
    if update == "backward":
        assert ref == pytest.approx(float(p * rho * (1 - rho) / (1 - p * rho)))
    else:
        assert ref == pytest.approx((1 - sqrt(1 - 4 * float(p * rho * (1 - rho)))) / 2)
    assert abs(float(J) - ref) <= 2e-3


# 10 ------------------------------------------------------------------------

GRID6 = [F(i, 7) for i in range(1, 7)]


@crit(10, "algebra, reduced relations, properties, F elimination, Temperley-Lieb, C_hat C; negative controls")
def test_c10_algebra_suite_passes_on_grid():
    for p, pt in product(GRID6, GRID6):
        P = ModelParams(p, pt)
        can = mpa.build_rep(P)
        report = mpa.verify_algebra(can)
        assert report.passed, (p, pt, report.failures)
        if p != pt:
            assert report["F = s(DE - D)"] and report["F = s(E - ED) + p/(1-p)"]
        assert mpa.verify_temperley_lieb(can).passed
        assert mpa.verify_algebra(mpa.build_rep(P, "alternative")).passed


@crit(10, "algebra, reduced relations, properties, F elimination, Temperley-Lieb, C_hat C; negative controls")
def test_c10_every_relation_has_negative_control():
    P = ModelParams(F(3, 7), F(5, 7))
    rep = mpa.build_rep(P)
    names = set(mpa.verify_algebra(rep).results) | {"TL " + n for n in mpa.verify_temperley_lieb(rep).results}
    caught = set()
    for m, i, j in product(("D", "E", "F", "E_hat", "D_hat"), (0, 1), (0, 1)):
        bad = mpa.perturb(rep, m, i, j)
        caught |= set(mpa.verify_algebra(bad).failures)
        caught |= {"TL " + n for n in mpa.verify_temperley_lieb(bad).failures}
    # a single-entry change cannot make the singular product DE invertible
    caught |= set(mpa.verify_algebra(mpa.perturb(mpa.perturb(rep, "D", 0, 1), "E", 1, 1)).failures)
    assert caught == names


# 11 ------------------------------------------------------------------------

@crit(11, "chip and bond-sweep histograms agree (chi-square p > 0.001) and match oracle within 4 sigma")
@pytest.mark.parametrize("L,N", [(5, 2), (6, 3), (7, 4)])
def test_c11_dynamics_equivalence(L, N):
    params = ModelParams(F(1, 2), F(3, 4))
    pi = oracle.stationary(L, N, params)
    keys = [c.bits for c in pi.configs]
    target = np.array([float(v) for v in pi.probs])
    # successive sweeps are correlated; sampling every L sweeps keeps counts close to multinomial
    counts = []
    for seed, dynamics in ((101, "chip"), (202, "bond")):
        hist = simulator.sample_configurations(L, N, params, 10**5, seed=seed + L, dynamics=dynamics, thin=L)
        counts.append([hist.get(k, 0) for k in keys])
    table = np.array(counts)
    assert chi2_contingency(table)[1] > 1e-3
    for row in table:
        n = row.sum()
        sigma = np.sqrt(target * (1 - target) / n)
        assert np.all(np.abs(row / n - target) <= 4 * sigma)


# 12 ------------------------------------------------------------------------

@crit(12, "identical seed and run settings give byte-identical simulate CSV")
def test_c12_reproducibility(capsys):
    argv = ["simulate", "-L", "24", "-N", "12", "-p", "1/2", "-pt", "3/4", "--sweeps", "20000",
            "--seed", "987654321", "--replicas", "2"]
    outputs = []
    for _ in range(2):
        assert cli.main(argv) == 0
        outputs.append(capsys.readouterr().out.encode())
    assert outputs[0] == outputs[1]
    assert b"observable,index,value,stderr" in outputs[0]
