from collections import Counter
from itertools import product
from math import comb

import pytest
from hypothesis import given, strategies as st

from gtasep.combinatorics import (
    compositions,
    count_configs_k,
    n_diff,
    partitions,
    stacked_sum_S,
    verify_composition_identity,
    verify_telescoping_identity,
)
from gtasep.core import DomainError, RingConfig, decompose, partition_vector
from gtasep.oracle import enumerate_configs


def test_compositions_small():
    assert sorted(compositions(4, 2)) == [(1, 3), (2, 2), (3, 1)]
    assert list(compositions(0, 0)) == [()]
    assert list(compositions(3, 0)) == []


@given(st.integers(1, 12), st.integers(1, 12))
def test_composition_count(N, k):
    cs = list(compositions(N, k))
    assert len(cs) == comb(N - 1, k - 1)
    assert len(set(cs)) == len(cs)
    assert all(len(c) == k and sum(c) == N and min(c) >= 1 for c in cs)


def test_partitions_small():
    assert list(partitions(4, 2)) == [(1, 0, 1, 0), (0, 2, 0, 0)]
    assert list(partitions(5, 3)) == [(2, 0, 1, 0, 0), (1, 2, 0, 0, 0)]
    assert list(partitions(5, 4)) == [(3, 1, 0, 0, 0)]


@given(st.integers(1, 14), st.integers(1, 14))
def test_partition_vectors_valid(N, k):
    ps = list(partitions(N, k))
    assert len(set(ps)) == len(ps)
    for n in ps:
        assert sum(n) == k
        assert sum((j + 1) * c for j, c in enumerate(n)) == N


def _brute_counts(L, N):
    by_k, by_n = Counter(), Counter()
    for c in enumerate_configs(L, N):
        d = decompose(c)
        by_k[d.k] += 1
        by_n[partition_vector(d, N)] += 1
    return by_k, by_n


def test_counts_match_enumeration():
    for L in range(2, 13):
        for N in range(1, L):
            by_k, by_n = _brute_counts(L, N)
            for k in range(0, L + 1):
                assert count_configs_k(L, N, k) == by_k.get(k, 0), (L, N, k)
            for n, cnt in by_n.items():
                assert n_diff(L, n) == cnt, (L, N, n)
            for k in range(1, min(N, L - N) + 1):
                assert sum(n_diff(L, n) for n in partitions(N, k)) == count_configs_k(L, N, k)


def test_count_examples():
    assert [count_configs_k(6, 4, k) for k in (1, 2)] == [6, 9]
    assert [count_configs_k(7, 4, k) for k in (1, 2, 3)] == [7, 21, 7]
    assert [count_configs_k(9, 5, k) for k in (1, 2, 3, 4)] == [9, 54, 54, 9]
    assert n_diff(6, (1, 0, 1, 0)) == 6 and n_diff(6, (0, 2, 0, 0)) == 3
    assert n_diff(9, (3, 1, 0, 0, 0)) == 9
    with pytest.raises(DomainError):
        count_configs_k(5, 5, 1)
    with pytest.raises(DomainError):
        n_diff(5, (1, 0, 0, 1))


def test_stacked_sum_is_nested_sum():
    # S_{k-1}(q) counts tuples 0 <= i_1 <= ... <= i_{k-1} <= q
    for km1 in range(0, 5):
        for q in range(0, 6):
            brute = sum(1 for t in product(range(q + 1), repeat=km1) if list(t) == sorted(t))
            assert stacked_sum_S(km1, q) == brute


@given(st.integers(1, 16), st.integers(1, 16))
def test_composition_identity(N, k):
    assert verify_composition_identity(N, k)


def test_telescoping_identity():
    for a in range(0, 31):
        for j in range(0, a // 2 + 1):
            assert verify_telescoping_identity(a, j), (a, j)
    with pytest.raises(DomainError):
        verify_telescoping_identity(3, 2)
