"""Counting of ring configurations by cluster structure, and the identities behind it.

All counts are exact Python integers.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import comb, factorial, prod
from typing import Iterator

from .core import DomainError


def compositions(N: int, k: int) -> Iterator[tuple[int, ...]]:
    """Ordered ``k``-tuples of positive integers summing to ``N``.

    Yields ``comb(N - 1, k - 1)`` tuples, generated from the cut points
    between consecutive parts.
    """
    if N < 0 or k < 0:
        raise DomainError("N and k must be non-negative")
    if k == 0:
        if N == 0:
            yield ()
        return
    for cuts in combinations(range(1, N), k - 1):
        bounds = (0, *cuts, N)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def partitions(N: int, k: int) -> Iterator[tuple[int, ...]]:
    """Partition vectors ``n`` of ``N`` into exactly ``k`` parts.

    ``n[j-1]`` counts the parts of size ``j``; the vectors come out in
    lexicographically decreasing order of the sorted part sizes.
    """
    if N < 1 or not 1 <= k <= N:
        return

    def descend(remaining: int, parts: int, largest: int):
        if parts == 0:
            if remaining == 0:
                yield ()
            return
        top = min(largest, remaining - (parts - 1))
        for size in range(top, 0, -1):
            if size * parts < remaining:
                break
            for rest in descend(remaining - size, parts - 1, size):
                yield (size, *rest)

    for sizes in descend(N, k, N):
        n = [0] * N
        for s in sizes:
            n[s - 1] += 1
        yield tuple(n)


def _check_ring(L: int, N: int) -> None:
    if L < 1 or not 1 <= N <= L - 1:
        raise DomainError(f"need 1 <= N <= L - 1, got L={L}, N={N}")


def count_configs_k(L: int, N: int, k: int) -> int:
    """Number of ring configurations of ``N`` particles with exactly ``k`` clusters."""
    _check_ring(L, N)
    if not 1 <= k <= min(N, L - N):
        return 0
    total = L * comb(L - N - 1, k - 1) * comb(N - 1, k - 1)
    count, rem = divmod(total, k)
    assert rem == 0
    return count


def stacked_sum_S(k_minus_1: int, q: int) -> int:
    """Nested-sum count ``S_{k-1}(q) = comb(k + q - 1, k - 1)``."""
    if k_minus_1 < 0 or q < 0:
        raise DomainError("S_{k-1}(q) needs k - 1 >= 0 and q >= 0")
    return comb(k_minus_1 + q, k_minus_1)


def n_diff(L: int, n) -> int:
    """Number of distinct ring configurations whose clusters realise partition ``n``."""
    n = tuple(n)
    N = sum((j + 1) * c for j, c in enumerate(n))
    k = sum(n)
    if any(c < 0 for c in n) or k < 1 or N + k > L:
        raise DomainError(f"partition {n} is not realisable on a ring of {L} sites")
    value = Fraction(L * factorial(k - 1), prod(factorial(c) for c in n))
    value *= comb(L - N - 1, k - 1)
    if value.denominator != 1:
        raise ArithmeticError(f"non-integral configuration count {value}")
    return value.numerator


def verify_composition_identity(N: int, k: int) -> bool:
    """Check that multinomial weights over partitions count the compositions."""
    total = sum(
        Fraction(factorial(k), prod(factorial(c) for c in n)) for n in partitions(N, k)
    )
    return total == comb(N - 1, k - 1)


def verify_telescoping_identity(a: int, j: int) -> bool:
    """Check the alternating-sum identity used to collapse the current to a single sum."""
    if j < 0 or a < 2 * j:
        raise DomainError(f"need a >= 2j >= 0, got a={a}, j={j}")
    lhs = Fraction(0)
    for m in range(j + 1):
        if a - 1 - j - m < 0:
            # only at a = 2j, m = j: (a - 2m)(a - 1 - j - m)! read as its Gamma limit 2
            lhs += 2 * (-1) ** m
        else:
            lhs += Fraction((-1) ** m * (a - 2 * m) * factorial(a - 1 - j - m), factorial(j - m))
    if a == 2 * j:
        lhs -= (-1) ** j
    return lhs == Fraction(factorial(a - j), factorial(j))
