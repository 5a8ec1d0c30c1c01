"""Two-dimensional matrix-product representation of the stationary state.

Matrices are 2x2 ``numpy`` object arrays of :class:`~fractions.Fraction`, so
every product and trace is exact.  Fixed-particle-number quantities are
extracted from traces of powers of ``C(mu) = E + mu D`` as polynomial
coefficients; no eigenvalue formulas are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Literal, Sequence

import numpy as np

from .core import DomainError, ModelParams, RepresentationError, RingConfig, Scalar

Variant = Literal["canonical", "alternative", "family"]


def _mat(rows) -> np.ndarray:
    return np.array([[Fraction(v) for v in row] for row in rows], dtype=object)


def _eye() -> np.ndarray:
    return _mat([[1, 0], [0, 1]])


def _zero() -> np.ndarray:
    return _mat([[0, 0], [0, 0]])


def _same(a, b) -> bool:
    return bool(np.all(a == b))


@dataclass(frozen=True, eq=False)
class Rep2x2:
    """A concrete representation ``(D, E, F, E_hat, D_hat)`` of the quadratic algebra."""

    p: Fraction
    p_tilde: Fraction
    c1: Fraction
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    E_hat: np.ndarray
    D_hat: np.ndarray
    variant: Variant
    family: tuple[Fraction, Fraction, Fraction] = field(default=(Fraction(1), Fraction(1), Fraction(1)))

    @property
    def C(self) -> np.ndarray:
        return self.E + self.D

    @property
    def C_hat(self) -> np.ndarray:
        return self.E_hat + self.D_hat + self.F

    @property
    def x(self) -> Fraction:
        return (1 - self.p_tilde) / (1 - self.p)


def build_family(params: ModelParams, d=1, e=1, f=1, c1=None) -> Rep2x2:
    """Four-parameter family of representations; ``c1`` defaults to ``p e / (1 - p)``.

    The algebra only closes for ``c1 = p e / (1 - p)``; other values are
    accepted so that :func:`verify_algebra` can be shown to reject them.
    """
    p, pt = params.require_rates()
    if not params.exact:
        raise DomainError("matrix representations are built over exact rationals")
    p, pt = Fraction(p), Fraction(pt)
    d, e, f = Fraction(d), Fraction(e), Fraction(f)
    if p == 0 or p == 1:
        raise RepresentationError(f"the representation is singular at p = {p}")
    if 0 in (d, e, f):
        raise RepresentationError("family parameters d, e, f must be nonzero")
    c1 = p * e / (1 - p) if c1 is None else Fraction(c1)
    g = p * e / (1 - p)
    b = (p - pt) * f / p
    D = d * _mat([[1, 0], [p * e / (f * (1 - p)), 0]])
    E = _mat([[e, b], [0, 0]])
    F = _mat([[0, f], [0, g]])
    E_hat = E - F + c1 * _eye()
    return Rep2x2(p, pt, c1, D, E, F, E_hat, D.copy(), "family", (d, e, f))


def build_rep(params: ModelParams, variant: Literal["canonical", "alternative"] = "canonical") -> Rep2x2:
    """The two standard gauges: ``d = e = f = 1`` (canonical) or ``e = 1 - p`` (alternative)."""
    p, _ = params.require_rates()
    if variant == "canonical":
        rep = build_family(params)
    elif variant == "alternative":
        rep = build_family(params, e=1 - Fraction(p) if params.exact else 1 - p)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return replace(rep, variant=variant)


def perturb(rep: Rep2x2, matrix: str, i: int, j: int, delta=1) -> Rep2x2:
    """Copy of ``rep`` with one entry of one stored matrix shifted by ``delta``."""
    m = getattr(rep, matrix).copy()
    m[i, j] += Fraction(delta)
    return replace(rep, **{matrix: m})


# ---------------------------------------------------------------------------
# algebra checks


@dataclass
class AlgebraReport:
    results: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.results.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.results.items() if not ok]

    def __getitem__(self, name: str) -> bool:
        return self.results[name]


def verify_algebra(rep: Rep2x2) -> AlgebraReport:
    """Check the bulk relations, their reduced form, the ansatz and the representation properties."""
    D, E, F, Eh, Dh = rep.D, rep.E, rep.F, rep.E_hat, rep.D_hat
    p, pt, c1 = rep.p, rep.p_tilde, rep.c1
    I = _eye()
    res = {
        "EhatE = EEhat + EF": _same(Eh @ E, E @ Eh + E @ F),
        "EhatD = EDhat": _same(Eh @ D, E @ Dh),
        "FD = pt DF + p DEhat": _same(F @ D, pt * (D @ F) + p * (D @ Eh)),
        "DhatE = (1-p) DEhat + (1-pt) DF": _same(Dh @ E, (1 - p) * (D @ Eh) + (1 - pt) * (D @ F)),
        "DhatD = DDhat": _same(Dh @ D, D @ Dh),
        "FE = 0": _same(F @ E, _zero()),
        "ansatz Ehat = E - F + c1": _same(Eh, E - F + c1 * I),
        "ansatz Dhat = D": _same(Dh, D),
        "reduced FD = c1 D": _same(F @ D, c1 * D),
        "reduced pDE - (p-pt)DF = c1(1-p)D": _same(p * (D @ E) - (p - pt) * (D @ F), c1 * (1 - p) * D),
        "ChatC = CChat": _same(rep.C_hat @ rep.C, rep.C @ rep.C_hat),
        "det(DE) = 0": (D @ E)[0, 0] * (D @ E)[1, 1] - (D @ E)[0, 1] * (D @ E)[1, 0] == 0,
    }
    if rep.variant == "canonical":
        res["D^2 = D"] = _same(D @ D, D)
        res["E^2 = E"] = _same(E @ E, E)
        res["Tr(DE) = x"] = np.trace(D @ E) == rep.x
        if p != pt:
            s = p / (p - pt)
            res["F = s(DE - D)"] = _same(F, s * (D @ E - D))
            res["F = s(E - ED) + p/(1-p)"] = _same(F, s * (E - E @ D) + p / (1 - p) * I)
    elif rep.variant == "alternative":
        res["D^2 = D"] = _same(D @ D, D)
        res["E^2 = (1-p)E"] = _same(E @ E, (1 - p) * E)
        res["Tr(DE) = 1-pt"] = np.trace(D @ E) == 1 - pt
    return AlgebraReport(res)


def verify_temperley_lieb(rep: Rep2x2) -> AlgebraReport:
    """Idempotent generators with ``EDE = xE`` and ``DED = xD``."""
    if rep.variant != "canonical":
        raise DomainError("the Temperley-Lieb relations hold in the canonical gauge")
    D, E, x = rep.D, rep.E, rep.x
    return AlgebraReport({
        "D^2 = D": _same(D @ D, D),
        "E^2 = E": _same(E @ E, E),
        "EDE = xE": _same(E @ D @ E, x * E),
        "DED = xD": _same(D @ E @ D, x * D),
    })


def config_weight(config: RingConfig, rep: Rep2x2) -> Fraction:
    """Trace of the matrix word of ``config`` (``D`` per particle, ``E`` per hole)."""
    prod = _eye()
    for tau in config.occupancy:
        prod = prod @ (rep.D if tau else rep.E)
    return Fraction(np.trace(prod))


# ---------------------------------------------------------------------------
# fugacity polynomials


class FugacityPolynomial:
    """Polynomial in the fugacity ``mu``; ``coeffs[n]`` multiplies ``mu**n``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence = ()):
        self.coeffs = list(coeffs)

    def __getitem__(self, n: int):
        return self.coeffs[n] if 0 <= n < len(self.coeffs) else 0

    def __add__(self, other: "FugacityPolynomial") -> "FugacityPolynomial":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return FugacityPolynomial(out)

    def mul(self, other: "FugacityPolynomial", max_degree: int | None = None) -> "FugacityPolynomial":
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return FugacityPolynomial()
        deg = len(a) + len(b) - 2
        if max_degree is not None:
            deg = min(deg, max_degree)
        out = [0] * (deg + 1)
        for i, ca in enumerate(a):
            if i > deg or not ca:
                continue
            for j in range(min(len(b), deg - i + 1)):
                cb = b[j]
                if cb:
                    out[i + j] += ca * cb
        return FugacityPolynomial(out)

    def __mul__(self, other):
        return self.mul(other)

    def __eq__(self, other) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        return all(self[i] == other[i] for i in range(n))

    def __repr__(self) -> str:
        return f"FugacityPolynomial({self.coeffs!r})"


class PolyMatrix2:
    """2x2 matrix with :class:`FugacityPolynomial` entries."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def identity(cls) -> "PolyMatrix2":
        one, zero = FugacityPolynomial([1]), FugacityPolynomial()
        return cls(one, zero, zero, one)

    @classmethod
    def from_linear(cls, const: np.ndarray, lin: np.ndarray, scale=1) -> "PolyMatrix2":
        """``scale * (const + mu lin)`` for constant 2x2 arrays."""
        e = [FugacityPolynomial([scale * const[i, j], scale * lin[i, j]]) for i in (0, 1) for j in (0, 1)]
        return cls(*e)

    @classmethod
    def constant(cls, m: np.ndarray, scale=1) -> "PolyMatrix2":
        return cls(*(FugacityPolynomial([scale * m[i, j]]) for i in (0, 1) for j in (0, 1)))

    def matmul(self, other: "PolyMatrix2", max_degree: int | None = None) -> "PolyMatrix2":
        m = max_degree
        return PolyMatrix2(
            self.a.mul(other.a, m) + self.b.mul(other.c, m),
            self.a.mul(other.b, m) + self.b.mul(other.d, m),
            self.c.mul(other.a, m) + self.d.mul(other.c, m),
            self.c.mul(other.b, m) + self.d.mul(other.d, m),
        )

    def __matmul__(self, other: "PolyMatrix2") -> "PolyMatrix2":
        return self.matmul(other)

    def power(self, n: int, max_degree: int | None = None) -> "PolyMatrix2":
        """Binary exponentiation, discarding powers of ``mu`` above ``max_degree``."""
        result, base = PolyMatrix2.identity(), self
        while n:
            if n & 1:
                result = result.matmul(base, max_degree)
            n >>= 1
            if n:
                base = base.matmul(base, max_degree)
        return result

    def trace(self) -> FugacityPolynomial:
        return self.a + self.d


def _integer_scale(*mats: np.ndarray) -> int:
    return lcm(*(Fraction(v).denominator for m in mats for v in m.flat))


def _exact_rep(params: ModelParams, rep: Rep2x2 | None) -> Rep2x2:
    if rep is not None:
        return rep
    if not params.exact:
        raise DomainError("MPA routines need rational p and p_tilde")
    return build_rep(params)


def _c_mu(rep: Rep2x2) -> tuple[PolyMatrix2, int]:
    """``s * C(mu)`` with integer entries, and the scale ``s``."""
    s = _integer_scale(rep.D, rep.E)
    E = np.vectorize(lambda v: int(v * s), otypes=[object])(rep.E)
    D = np.vectorize(lambda v: int(v * s), otypes=[object])(rep.D)
    return PolyMatrix2.from_linear(E, D), s


def _scaled_int(m: np.ndarray, s: int) -> np.ndarray:
    return np.vectorize(lambda v: int(v * s), otypes=[object])(m)


def grand_canonical_trace(L: int, params: ModelParams, rep: Rep2x2 | None = None) -> FugacityPolynomial:
    """``Tr C(mu)^L`` with all coefficients (exact rationals)."""
    rep = _exact_rep(params, rep)
    cm, s = _c_mu(rep)
    tr = cm.power(L).trace()
    return FugacityPolynomial([Fraction(c, s**L) for c in tr.coeffs])


def grand_canonical_Z(L: int, N: int, params: ModelParams, rep: Rep2x2 | None = None) -> Fraction:
    """``[mu^N] Tr C(mu)^L``, the fixed-``N`` partition function from the trace."""
    if not 0 <= N <= L:
        raise DomainError("need 0 <= N <= L")
    rep = _exact_rep(params, rep)
    cm, s = _c_mu(rep)
    return Fraction(cm.power(L, N).trace()[N], s**L)


def _powers_needed(rep: Rep2x2, n: int, deg: int):
    cm, s = _c_mu(rep)
    return cm.power(n, deg), s


def _word_coeff(rep: Rep2x2, prefix: Sequence[np.ndarray], n: int, deg: int) -> Fraction:
    """``[mu^deg] Tr(prefix_1 ... prefix_j C(mu)^n)`` for constant prefix matrices."""
    cm, s = _c_mu(rep)
    m = cm.power(n, deg)
    pre = _eye()
    for q in prefix:
        pre = pre @ q
    t = _integer_scale(pre)
    P = PolyMatrix2.constant(_scaled_int(pre, t))
    return Fraction((P.matmul(m, deg).trace())[deg], t * s**n)


def _Z_nonzero(L, N, params, rep) -> Fraction:
    Z = grand_canonical_Z(L, N, params, rep)
    if Z == 0:
        raise DomainError("partition function vanishes at these parameters")
    return Z


def mpa_density(L: int, N: int, params: ModelParams, rep: Rep2x2 | None = None) -> Fraction:
    """``Z^{-1} [mu^{N-1}] Tr(D C(mu)^{L-1})``; equals ``N / L`` by translation invariance."""
    if not 1 <= N <= L:
        raise DomainError("need 1 <= N <= L")
    rep = _exact_rep(params, rep)
    return _word_coeff(rep, [rep.D], L - 1, N - 1) / _Z_nonzero(L, N, params, rep)


def mpa_current(L: int, N: int, params: ModelParams, rep: Rep2x2 | None = None) -> Fraction:
    """Current as a sum over chip lengths: ``(p/Z) sum_k pt^k [mu^{N-k-1}] Tr(DE C^{L-2-k})``."""
    if not 1 <= N <= L - 1:
        raise DomainError("need 1 <= N <= L - 1")
    rep = _exact_rep(params, rep)
    Z = _Z_nonzero(L, N, params, rep)
    total = Fraction(0)
    for k in range(N):
        total += rep.p_tilde**k * _word_coeff(rep, [rep.D, rep.E], L - 2 - k, N - k - 1)
    return rep.p * total / Z


def mpa_pair_correlation(L: int, N: int, r: int, params: ModelParams,
                         rep: Rep2x2 | None = None) -> Fraction:
    """``Z^{-1} [mu^{N-2}] Tr(D C^r D C^{L-2-r})``."""
    if not 0 <= r <= L - 2:
        raise DomainError("need 0 <= r <= L - 2")
    if not 2 <= N <= L:
        raise DomainError("need 2 <= N <= L")
    rep = _exact_rep(params, rep)
    cm, s = _c_mu(rep)
    deg = N - 2
    t = _integer_scale(rep.D)
    Dm = PolyMatrix2.constant(_scaled_int(rep.D, t))
    left = Dm.matmul(cm.power(r, deg), deg)
    right = Dm.matmul(cm.power(L - 2 - r, deg), deg)
    coeff = left.matmul(right, deg).trace()[deg]
    return Fraction(coeff, t * t * s ** (L - 2)) / _Z_nonzero(L, N, params, rep)
