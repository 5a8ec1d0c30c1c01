"""Closed-form finite-size observables of the ring.

Every series here terminates, so everything is a finite sum over exact
integer coefficients.  With rational parameters the results are exact
:class:`~fractions.Fraction` values.  With float parameters the same sums are
carried out in double-precision binary floating point with an unbounded
exponent (an mpmath context at 53 bits), which keeps huge binomials at large
``L`` from overflowing; the result is returned as a Python ``float``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Literal

from mpmath.ctx_mp import MPContext

from .core import DomainError, ModelParams, RepresentationError, Scalar

_MP = MPContext()
_MP.prec = 53


# ---------------------------------------------------------------------------
# polynomial helpers


def _horner(coeffs, x):
    """Evaluate ``sum(c_k x^k)``; integer coefficients at a rational ``x`` stay in integers."""
    if not coeffs:
        return Fraction(0) if isinstance(x, Fraction) else x * 0
    if isinstance(x, Fraction) and all(isinstance(c, int) for c in coeffs):
        a, b = x.numerator, x.denominator
        acc, bpow = coeffs[-1], 1
        for c in reversed(coeffs[:-1]):
            bpow *= b
            acc = acc * a + c * bpow
        return Fraction(acc, bpow)
    acc = coeffs[-1] * 1
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _padd(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _pscale(a, s):
    return [s * c for c in a]


def _pshift(a, m):
    return [0] * m + list(a) if a else []


def _ptrim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


@dataclass(frozen=True)
class ZPolynomial:
    """Partition function as an integer polynomial in ``x`` or in ``nu = 1 - x``.

    ``coeffs[m]`` is the coefficient of ``basis**m``.
    """

    basis: Literal["x", "nu"]
    coeffs: tuple[int, ...]

    def evaluate(self, value):
        return _horner(list(self.coeffs), value)

    def __call__(self, value):
        return self.evaluate(value)

    @property
    def degree(self) -> int:
        return len(_ptrim(self.coeffs)) - 1

    def nonzero_terms(self) -> dict[int, int]:
        return {m: c for m, c in enumerate(self.coeffs) if c}

    def derivative(self) -> "ZPolynomial":
        return ZPolynomial(self.basis, tuple(m * c for m, c in enumerate(self.coeffs))[1:] or (0,))

    def change_basis(self) -> "ZPolynomial":
        """Rewrite in the other variable via ``x = 1 - nu`` (the map is an involution)."""
        out = [0] * len(self.coeffs)
        for k, c in enumerate(self.coeffs):
            if c:
                for m in range(k + 1):
                    out[m] += c * comb(k, m) * (-1) ** m
        return ZPolynomial("nu" if self.basis == "x" else "x", tuple(_ptrim(out)) or (0,))

    def to_x(self) -> "ZPolynomial":
        return self if self.basis == "x" else self.change_basis()

    def to_nu(self) -> "ZPolynomial":
        return self if self.basis == "nu" else self.change_basis()


def _check_sizes(L: int, N: int) -> None:
    if L < 1:
        raise DomainError(f"ring length must be >= 1, got {L}")
    if not 0 <= N <= L:
        raise DomainError(f"need 0 <= N <= L, got L={L}, N={N}")


@lru_cache(maxsize=None)
def partition_poly_x(L: int, N: int) -> ZPolynomial:
    """``Z_{L,N}`` as a polynomial in ``x``: configurations weighted by ``x**k``."""
    _check_sizes(L, N)
    if N in (0, L):
        return ZPolynomial("x", (1,))
    coeffs = [0]
    for k in range(1, min(N, L - N) + 1):
        c, r = divmod(L * comb(L - N, k) * comb(N - 1, k - 1), L - N)
        assert r == 0
        coeffs.append(c)
    return ZPolynomial("x", tuple(coeffs))


@lru_cache(maxsize=None)
def partition_poly_nu(L: int, N: int) -> ZPolynomial:
    """``Z_{L,N}`` expanded in ``nu`` from the terminating hypergeometric sum."""
    _check_sizes(L, N)
    coeffs = []
    for m in range(min(N, L - N) + 1):
        num = L * factorial(L - m - 1)
        den = factorial(m) * factorial(N - m) * factorial(L - N - m)
        c, r = divmod(num, den)
        if r:
            raise ArithmeticError(f"non-integral nu-coefficient at L={L}, N={N}, m={m}")
        coeffs.append((-1) ** m * c)
    return ZPolynomial("nu", tuple(coeffs))


def _z_nu_list(a: int, b: int) -> list[int]:
    """``Z_{a,b}`` in the nu basis, zero outside ``0 <= b <= a`` and ``Z_{0,0} = 1``."""
    if a < 0 or b < 0 or b > a:
        return []
    if a == 0:
        return [1]
    return list(partition_poly_nu(a, b).coeffs)


# ---------------------------------------------------------------------------
# scalar policy


def _work_values(params: ModelParams):
    """Return ``(x, p, p_tilde, exact)`` converted to the working number type."""
    x = params.x
    p, pt = (params.p, params.p_tilde) if params.has_rates else (None, None)
    if params.exact:
        conv = Fraction
    else:
        conv = _MP.mpf
    return (
        conv(x),
        None if p is None else conv(p),
        None if pt is None else conv(pt),
        params.exact,
    )


def _out(value, exact: bool) -> Scalar:
    return value if exact else float(value)


def _z_eval(a: int, b: int, x):
    """``Z_{a,b}(x)`` with the conventions for empty, full and impossible rings."""
    if a < 0 or b < 0 or b > a:
        return 0
    if b in (0, a):
        return 1
    return _z_eval_cached(a, b, x, type(x))


@lru_cache(maxsize=65536)
def _z_eval_cached(a, b, x, kind):
    # ``kind`` keeps Fraction and mpf keys apart: Fraction(3, 2) == mpf(1.5).
    return partition_poly_x(a, b).evaluate(x)


def partition_function(L: int, N: int, params: ModelParams) -> Scalar:
    """Evaluate ``Z_{L,N}`` at the parameters' ``x``."""
    _check_sizes(L, N)
    x, _, _, exact = _work_values(params)
    z = _z_eval(L, N, x)
    return Fraction(z) if exact else float(z)


# ---------------------------------------------------------------------------
# current


def cluster_flux(n: int, params: ModelParams) -> Scalar:
    """Mean number of jumps per update made by an isolated cluster of ``n`` particles."""
    if n < 1:
        raise DomainError("cluster size must be >= 1")
    p, pt = params.require_rates()
    return p * sum(pt**j for j in range(n))


def _check_rates_for_exact(params: ModelParams) -> None:
    p, _ = params.require_rates()
    if p == 1:
        raise RepresentationError(
            "the closed-form current is singular at p = 1; use the oracle or the simulator"
        )


def current(L: int, N: int, params: ModelParams) -> Scalar:
    """Stationary current (jumps per site per update) on a ring of ``L`` sites with ``N`` particles."""
    _check_sizes(L, N)
    _check_rates_for_exact(params)
    x, p, pt, exact = _work_values(params)
    if N in (0, L):
        return Fraction(0) if exact else 0.0
    M = min(N, L - N)
    A = L - N - 1
    # weights w_m stand for p_tilde**m; in exact mode they are scaled to integers
    if exact:
        c, d = pt.numerator, pt.denominator
        w = [c**m * d ** (N - 1 - m) for m in range(N)]
        scale = Fraction(d ** (N - 1))
    else:
        w = [pt**m for m in range(N)]
        scale = 1
    coeffs = [0]
    for k in range(1, M + 1):
        # H_k = sum_{m=0}^{N-k} w_m C(N-1-m, k-1), walking j = N-1-m upwards
        H, binom = 0, 1
        for j in range(k - 1, N):
            if binom and w[N - 1 - j]:
                H += w[N - 1 - j] * binom
            binom = binom * (j + 1) // (j + 2 - k)
        coeffs.append(comb(A, k - 1) * H)
    numerator = _horner(coeffs, x)
    Z = _z_eval(L, N, x)
    if x == 0:
        # Only single-cluster configurations survive: ratio of the linear terms.
        numerator, Z = coeffs[1], partition_poly_x(L, N).coeffs[1]
    if Z == 0:
        raise DomainError("partition function vanishes at these parameters")
    value = p * numerator / (scale * Z)
    return _out(value, exact)


# ---------------------------------------------------------------------------
# correlations


@dataclass(frozen=True)
class CorrelationResult:
    r: int
    value: Scalar
    kind: Literal["particle-particle", "particle-hole"] = "particle-particle"


def _aggregation_limit_pp(L: int, N: int, r: int) -> Fraction:
    # Single cluster of N particles: pairs at distance r + 1 inside the cluster,
    # counted both ways round the ring.
    value = Fraction(0)
    if r <= N - 2:
        value += Fraction(N - 1 - r, L)
    if r >= L - N:
        value += Fraction(r - L + N + 1, L)
    return value


def pair_correlation(L: int, N: int, r: int, params: ModelParams) -> CorrelationResult:
    """Probability that sites ``i`` and ``i + 1 + r`` are both occupied."""
    _check_sizes(L, N)
    if N < 2:
        raise DomainError("pair correlations need N >= 2")
    if not 0 <= r <= L - 2:
        raise DomainError(f"separation r must satisfy 0 <= r <= L - 2, got {r}")
    x, _, _, exact = _work_values(params)
    if x == 0 and N < L:
        value = _aggregation_limit_pp(L, N, r)
        return CorrelationResult(r, value if exact else float(value))
    total = 0
    for q in range(max(0, r - L + N), min(r, N - 2) + 1):
        z1 = _z_eval(r + 1, q + 1, x)
        z2 = _z_eval(L - 1 - r, N - 1 - q, x)
        total += (q + 1) * (N - 1 - q) * z1 * z2
    Z = _z_eval(L, N, x)
    if Z == 0:
        raise DomainError("partition function vanishes at these parameters")
    value = total / ((r + 1) * (L - 1 - r) * Z)
    if exact:
        value = Fraction(value)
    return CorrelationResult(r, _out(value, exact))


def pair_correlation_profile(L: int, N: int, params: ModelParams) -> list[Scalar]:
    return [pair_correlation(L, N, r, params).value for r in range(L - 1)]


def nn_particle_particle(L: int, N: int, params: ModelParams) -> Scalar:
    return pair_correlation(L, N, 0, params).value


def _nn_particle_hole_direct(L, N, x):
    if N == 1:
        return Fraction(1, L) if isinstance(x, Fraction) else _MP.mpf(1) / L
    return Fraction(N, L) - Fraction(N - 1, L - 1) * (_z_eval(L - 1, N - 1, x) / _z_eval(L, N, x))


def nn_particle_hole_alt(L: int, N: int, params: ModelParams) -> Scalar:
    """Nearest-neighbour particle-hole correlation from the direct trace expansion."""
    _check_sizes(L, N)
    if not 1 <= N <= L - 1:
        raise DomainError("need 1 <= N <= L - 1")
    x, _, _, exact = _work_values(params)
    if x == 0:
        return Fraction(1, L) if exact else 1.0 / L
    nu = 1 - x
    total = sum(nu**m * _z_eval(L - 2 - 2 * m, N - 1 - m, x) for m in range((L - 2) // 2 + 1))
    value = x * total / _z_eval(L, N, x)
    return _out(Fraction(value) if exact else value, exact)


def nn_particle_hole(L: int, N: int, params: ModelParams) -> Scalar:
    """Probability that site ``i`` is occupied and site ``i + 1`` empty."""
    _check_sizes(L, N)
    if not 1 <= N <= L - 1:
        raise DomainError("need 1 <= N <= L - 1")
    x, _, _, exact = _work_values(params)
    if x == 0:
        value = Fraction(1, L)
        return value if exact else float(value)
    if exact:
        direct = _nn_particle_hole_direct(L, N, x)
        if direct != nn_particle_hole_alt(L, N, params):
            raise ArithmeticError("particle-hole correlation routes disagree")
        return direct
    if N == 1:
        return 1.0 / L
    return float(_MP.mpf(N) / L - _MP.mpf(N - 1) / (L - 1) * _z_eval(L - 1, N - 1, x) / _z_eval(L, N, x))


# ---------------------------------------------------------------------------
# density identities


def density_identity_report(L: int, N: int) -> dict[str, bool]:
    """Check the particle-density, hole-density and difference identities in ``nu``.

    Each identity is multiplied through by ``L`` so that only integer polynomial
    arithmetic is involved.
    """
    _check_sizes(L, N)
    if N < 1:
        raise DomainError("density identities need N >= 1")
    Z = _z_nu_list(L, N)
    part, hole, diff = [], [], []
    for m in range(L // 2 + 1):
        part = _padd(part, _pshift(_padd(_z_nu_list(L - 1 - 2 * m, N - m - 1),
                                         _pscale(_z_nu_list(L - 2 * m, N - m), -1)), m))
        hole = _padd(hole, _pshift(_padd(_z_nu_list(L - 1 - 2 * m, N - m),
                                         _pscale(_z_nu_list(L - 2 * m, N - m), -1)), m))
        diff = _padd(diff, _pshift(_padd(_z_nu_list(L - 1 - 2 * m, N - 1 - m),
                                         _pscale(_z_nu_list(L - 1 - 2 * m, N - m), -1)), m))
    return {
        "particle density": _ptrim(_pscale(Z, N)) == _ptrim(_pscale(_padd(Z, part), L)),
        "hole density": _ptrim(_pscale(Z, L - N)) == _ptrim(_pscale(_padd(Z, hole), L)),
        "density difference": _ptrim(_pscale(Z, 2 * N - L)) == _ptrim(_pscale(diff, L)),
    }


def verify_density_identities(L: int, N: int) -> bool:
    return all(density_identity_report(L, N).values())


# ---------------------------------------------------------------------------
# thermodynamic limits


def thermo_current_reference(rho: float, p: float,
                             update: Literal["backward", "parallel"]) -> float:
    """Infinite-ring current of backward-sequential or parallel-update TASEP."""
    if not 0 < rho < 1 or not 0 < p < 1:
        raise DomainError("need 0 < rho < 1 and 0 < p < 1")
    if update == "backward":
        return p * rho * (1 - rho) / (1 - p * rho)
    if update == "parallel":
        return (1 - math.sqrt(1 - 4 * p * rho * (1 - rho))) / 2
    raise DomainError(f"unknown update {update!r}")


def saddle_y(x: float, rho: float) -> float:
    """Dominant cluster density ``k / L`` of the parallel-update partition sum."""
    if not 0 < rho < 1 or x <= 0:
        raise DomainError("need 0 < rho < 1 and x > 0")
    a = 1 - 1 / x
    s = rho * (1 - rho)
    if a == 0:
        return s
    disc = 1 - 4 * a * s
    if disc < 0:
        raise DomainError("negative discriminant: no real stationary point")
    return (1 - math.sqrt(disc)) / (2 * a)
