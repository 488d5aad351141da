import itertools
import time
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhquench.fock import (
    build_partition_map,
    count_states,
    dimension,
    enumerate_basis,
    multi_sector_basis,
)

from oracles import brute_basis


def test_dimension_values():
    assert dimension(6, 6) == 462
    assert dimension(2, 2) == 3
    assert dimension(5, 0) == 1
    assert dimension(1, 7) == 1


def test_dimension_is_fast():
    t0 = time.perf_counter()
    for _ in range(100):
        dimension(6, 6)
    assert (time.perf_counter() - t0) / 100 < 1e-3


def test_dimension_rejects_bad_input():
    with pytest.raises(ValueError):
        dimension(0, 1)
    with pytest.raises(ValueError):
        dimension(2, -1)
    with pytest.raises(OverflowError):
        dimension(200, 200)


def test_small_basis_order():
    b = enumerate_basis(2, 2)
    assert [tuple(s) for s in b.states] == [(2, 0), (1, 1), (0, 2)]


def test_extreme_ranks():
    b = enumerate_basis(6, 6)
    assert b.rank((6, 0, 0, 0, 0, 0)) == 0
    assert b.rank((0, 0, 0, 0, 0, 6)) == 461


@pytest.mark.parametrize("L,N", [(1, 3), (3, 0), (3, 4), (4, 4), (5, 3)])
def test_basis_matches_brute_force(L, N):
    b = enumerate_basis(L, N)
    assert [tuple(s) for s in b.states] == brute_basis(L, N)


def test_round_trip_exhaustive():
    b = enumerate_basis(6, 6)
    ranks = b.rank(b.states)
    np.testing.assert_array_equal(ranks, np.arange(b.dim))
    lookup = {tuple(s): i for i, s in enumerate(b.states)}
    for i in range(b.dim):
        assert b.rank(b.unrank(i)) == i
        assert lookup[b.unrank(i)] == i


def test_index_of_rejects_foreign_state():
    b = enumerate_basis(3, 3)
    with pytest.raises(KeyError):
        b.index_of((1, 1, 0))
    with pytest.raises(KeyError):
        b.index_of((1, 1, 1, 0))


def test_capped_basis():
    b = enumerate_basis(4, 4, max_occupation=1)
    assert b.dim == 1
    assert tuple(b.states[0]) == (1, 1, 1, 1)
    assert count_states(3, 3, 2) == dimension(3, 3) - 3


def test_max_dim_guard():
    with pytest.raises(MemoryError):
        enumerate_basis(10, 10, max_dim=1000)


def test_multi_sector_dimension_identity():
    m = multi_sector_basis(6, 6)
    assert m.dim == comb(12, 6) == 924
    assert sum(comb(n + 5, 5) for n in range(7)) == m.dim
    assert m.sector_of(0) == (0, 0)
    assert m.sector_of(923) == (6, 461)


def test_partition_trivial_examples():
    b = enumerate_basis(2, 2)
    pm = build_partition_map(b, [0])
    i11, i20 = b.index_of((1, 1)), b.index_of((2, 0))
    assert (pm.n_A[i11], pm.rank_A[i11], pm.rank_B[i11]) == (1, 0, 0)
    assert (pm.n_A[i20], pm.rank_A[i20], pm.rank_B[i20]) == (2, 0, 0)


def test_partition_triples_are_a_bijection():
    b = enumerate_basis(6, 6)
    pm = build_partition_map(b, [0, 1, 2])
    triples = set(zip(pm.n_A.tolist(), pm.rank_A.tolist(), pm.rank_B.tolist()))
    assert len(triples) == 462
    # brute force: every way of splitting each state into (A, B) sub-states
    expected = set()
    for s in brute_basis(6, 6):
        a, rest = s[:3], s[3:]
        nA = sum(a)
        expected.add((nA, brute_basis(3, nA).index(a), brute_basis(3, 6 - nA).index(rest)))
    assert triples == expected
    assert sorted(set(pm.n_A.tolist())) == list(range(7))


@pytest.mark.parametrize("A", [(0,), (1, 3), (0, 2, 5), (1, 2, 3, 4), tuple(range(6))])
def test_partition_completeness(A):
    b = enumerate_basis(6, 6)
    pm = build_partition_map(b, A)
    total = sum(count_states(len(A), n) * count_states(6 - len(A), 6 - n) for n in range(7))
    assert total == b.dim
    for n, idx in pm.blocks():
        assert len(idx) == pm.dims_A[n] * pm.dims_B[n]


def test_partition_rejects_bad_subsystem():
    b = enumerate_basis(3, 3)
    with pytest.raises(ValueError):
        build_partition_map(b, [])
    with pytest.raises(ValueError):
        build_partition_map(b, [3])


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 5), N=st.integers(0, 5), data=st.data())
def test_rank_unrank_property(L, N, data):
    b = enumerate_basis(L, N)
    i = data.draw(st.integers(0, b.dim - 1))
    assert b.rank(b.unrank(i)) == i
    assert sum(b.unrank(i)) == N


@settings(max_examples=40, deadline=None)
@given(L=st.integers(2, 5), N=st.integers(0, 4), data=st.data())
def test_partition_property(L, N, data):
    b = enumerate_basis(L, N)
    A = data.draw(st.lists(st.integers(0, L - 1), min_size=1, max_size=L, unique=True))
    pm = build_partition_map(b, A)
    Asorted = sorted(A)
    for k in range(b.dim):
        s = tuple(int(x) for x in b.states[k])
        assert pm.n_A[k] == sum(s[a] for a in Asorted)
    assert len(set(zip(pm.n_A.tolist(), pm.rank_A.tolist(), pm.rank_B.tolist()))) == b.dim


def test_enumeration_is_itertools_consistent():
    # descending lexicographic order is the reverse of sorted product order
    states = [s for s in itertools.product(range(4), repeat=3) if sum(s) == 3]
    assert brute_basis(3, 3) == sorted(states)[::-1]
