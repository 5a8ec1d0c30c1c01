"""Ring configurations, cluster structure and model parameters.

Sites are labeled ``1..L`` clockwise in the public API; internally a
configuration is a Python ``int`` whose bit ``i`` holds the occupation of
site ``i + 1``.  Particles hop clockwise, i.e. from site ``i`` to ``i + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

Scalar = Union[Fraction, float]


class GtasepError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(GtasepError, ValueError):
    """An argument is outside the domain of the requested operation."""


class RepresentationError(DomainError):
    """The matrix representation is undefined at the requested parameters."""


def to_scalar(value) -> Scalar:
    """Coerce ``value`` to the scalar policy.

    Integers, :class:`~fractions.Fraction` and strings of the form ``"a/b"``
    become exact rationals; floats (and decimal strings such as ``"0.5"``)
    become floats.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        if any(c in text for c in ".eE") and "/" not in text:
            return float(text)
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a scalar")


def is_exact(*values) -> bool:
    return all(v is None or isinstance(v, (Fraction, int)) for v in values)


def _check_probability(name: str, value) -> None:
    if not 0 <= value <= 1:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ModelParams:
    """Hopping probabilities ``p`` (cluster front) and ``p_tilde`` (follow-up hop).

    Exact-formula routines only need the derived ratio
    ``x = (1 - p_tilde) / (1 - p)``; :meth:`from_x` and :meth:`from_nu` build
    parameter objects carrying ``x`` alone.
    """

    p: Scalar | None = None
    p_tilde: Scalar | None = None
    x_free: Scalar | None = None

    def __post_init__(self):
        for name in ("p", "p_tilde", "x_free"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, to_scalar(value))
        if self.x_free is None:
            if self.p is None or self.p_tilde is None:
                raise DomainError("either (p, p_tilde) or x must be given")
        elif self.p is not None or self.p_tilde is not None:
            raise DomainError("give either (p, p_tilde) or x, not both")
        if self.p is not None:
            _check_probability("p", self.p)
            _check_probability("p_tilde", self.p_tilde)

    @classmethod
    def from_x(cls, x) -> "ModelParams":
        return cls(x_free=x)

    @classmethod
    def from_nu(cls, nu) -> "ModelParams":
        nu = to_scalar(nu)
        return cls(x_free=1 - nu)

    @property
    def has_rates(self) -> bool:
        return self.p is not None

    @property
    def exact(self) -> bool:
        return is_exact(self.p, self.p_tilde, self.x_free)

    @property
    def x(self) -> Scalar:
        if self.x_free is not None:
            return self.x_free
        if self.p == 1:
            raise RepresentationError("x = (1 - p~)/(1 - p) is undefined at p = 1")
        return (1 - self.p_tilde) / (1 - self.p)

    @property
    def nu(self) -> Scalar:
        return 1 - self.x

    def require_rates(self) -> tuple[Scalar, Scalar]:
        if not self.has_rates:
            raise DomainError("this operation needs the hopping probabilities p and p_tilde")
        return self.p, self.p_tilde

    def as_float(self) -> "ModelParams":
        if self.x_free is not None:
            return ModelParams(x_free=float(self.x_free))
        return ModelParams(float(self.p), float(self.p_tilde))


@dataclass(frozen=True)
class RingConfig:
    """Occupancy of a ring of ``L`` sites, stored bit-packed in an ``int``."""

    L: int
    bits: int

    def __post_init__(self):
        if self.L < 1:
            raise DomainError("a ring needs at least one site")
        if self.bits < 0 or self.bits >> self.L:
            raise DomainError("occupancy bits exceed the ring length")

    @classmethod
    def from_occupancy(cls, occupancy: Sequence[int]) -> "RingConfig":
        bits = 0
        for i, tau in enumerate(occupancy):
            if tau not in (0, 1):
                raise DomainError(f"site states must be 0 or 1, got {tau!r}")
            bits |= tau << i
        return cls(len(occupancy), bits)

    @classmethod
    def from_word(cls, word: str) -> "RingConfig":
        """Parse a string over ``{D, E}`` (``D`` occupied, ``E`` empty)."""
        table = {"D": 1, "E": 0}
        try:
            return cls.from_occupancy([table[c] for c in word.strip().upper()])
        except KeyError as exc:
            raise DomainError(f"configuration words use only D and E: {word!r}") from exc

    @classmethod
    def from_sites(cls, L: int, sites: Iterable[int]) -> "RingConfig":
        """Build from 1-based occupied site labels."""
        bits = 0
        for s in sites:
            if not 1 <= s <= L:
                raise DomainError(f"site {s} outside 1..{L}")
            bits |= 1 << (s - 1)
        return cls(L, bits)

    @property
    def N(self) -> int:
        return bin(self.bits).count("1")

    @property
    def occupancy(self) -> tuple[int, ...]:
        return tuple((self.bits >> i) & 1 for i in range(self.L))

    def occupied(self, site: int) -> bool:
        """Occupation of 1-based ``site`` (taken modulo ``L``)."""
        return bool((self.bits >> ((site - 1) % self.L)) & 1)

    def to_word(self) -> str:
        return "".join("D" if t else "E" for t in self.occupancy)

    def __str__(self) -> str:
        return self.to_word()


@dataclass(frozen=True)
class ClusterDecomposition:
    """Maximal particle runs of a configuration, in clockwise order.

    ``clusters`` holds ``(start_site, length)`` pairs with 1-based start sites
    sorted increasingly; ``gaps[j]`` is the length of the hole run directly in
    front of cluster ``j``.  A full ring is one cluster with no gap, an empty
    ring has no cluster and a single gap of length ``L``.
    """

    L: int
    clusters: tuple[tuple[int, int], ...]
    gaps: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(n for _, n in self.clusters)


def decompose(config: RingConfig) -> ClusterDecomposition:
    L, occ = config.L, config.occupancy
    n_part = sum(occ)
    if n_part == 0:
        return ClusterDecomposition(L, (), (L,))
    if n_part == L:
        return ClusterDecomposition(L, ((1, L),), ())
    # Walk once around the ring starting just after a hole so that no run is split.
    hole = occ.index(0)
    clusters, gaps = [], []
    i = 0
    while i < L:
        site = (hole + 1 + i) % L
        if occ[site]:
            start, n = site, 0
            while i < L and occ[(hole + 1 + i) % L]:
                n += 1
                i += 1
            g = 0
            while i < L and not occ[(hole + 1 + i) % L]:
                g += 1
                i += 1
            clusters.append((start + 1, n))
            gaps.append(g)
        else:
            i += 1
    # The walk starts right after a hole, so a leading hole run belongs to the last cluster.
    lead = 0
    while not occ[(hole + 1 + lead) % L]:
        lead += 1
    gaps[-1] += lead
    order = sorted(range(len(clusters)), key=lambda j: clusters[j][0])
    return ClusterDecomposition(
        L, tuple(clusters[j] for j in order), tuple(gaps[j] for j in order)
    )


def cluster_count(config: RingConfig) -> int:
    bits, L = config.bits, config.L
    if bits == 0:
        return 0
    full = (1 << L) - 1
    if bits == full:
        return 1
    # A cluster front is an occupied site whose clockwise neighbour is empty.
    shifted = ((bits >> 1) | ((bits & 1) << (L - 1))) & full
    return bin(bits & ~shifted & full).count("1")


def rotate(config: RingConfig, shift: int) -> RingConfig:
    """Shift every particle ``shift`` sites clockwise."""
    L = config.L
    s = shift % L
    full = (1 << L) - 1
    bits = ((config.bits << s) | (config.bits >> (L - s))) & full
    return RingConfig(L, bits)


def partition_vector(decomp: ClusterDecomposition, N: int) -> tuple[int, ...]:
    """``n[j-1]`` is the number of clusters of size ``j``."""
    n = [0] * N
    for size in decomp.sizes:
        if size > N:
            raise DomainError("decomposition has more particles than N")
        n[size - 1] += 1
    if sum((j + 1) * c for j, c in enumerate(n)) != N:
        raise DomainError("decomposition does not hold N particles")
    return tuple(n)
