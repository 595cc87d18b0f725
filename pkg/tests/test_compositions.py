import math
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permch.compositions import (
    Composition,
    d_c,
    enumerate_compositions,
    lattice_size,
    parse_composition,
    rank,
    size_bounds,
    type_class_size,
    unrank,
)


def test_enumerate_small_case():
    comps = enumerate_compositions(2, 2)
    assert sorted(c.counts for c in comps) == [(0, 2), (1, 1), (2, 0)]


def test_enumerate_count_matches_binomial():
    assert len(enumerate_compositions(3, 4)) == 15 == math.comb(6, 2)


def test_size_bounds_q2_n4():
    lo, hi = size_bounds(2, 4)
    assert (lo, lattice_size(2, 4), hi) == (4, 5, 8)


@pytest.mark.parametrize("q,n", [(1, 3), (2, -1)])
def test_enumerate_rejects_bad_domain(q, n):
    with pytest.raises(ValueError):
        enumerate_compositions(q, n)


@pytest.mark.parametrize("q,n", [(2, 0), (2, 7), (3, 6), (4, 5), (5, 3)])
def test_enumeration_distinct_valid_and_ranked(q, n):
    comps = enumerate_compositions(q, n)
    assert len(comps) == len(set(comps)) == lattice_size(q, n)
    for i, c in enumerate(comps):
        assert c.q == q and c.n == n and min(c.counts) >= 0
        assert rank(c) == i
        assert unrank(i, q, n) == c


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_size_bounds_hold(q):
    for n in range(q - 1, 30):
        lo, hi = size_bounds(q, n)
        assert lo <= lattice_size(q, n) <= hi


def test_d_c_examples():
    assert d_c((3, 0, 1), (3, 0, 1)) == 0
    assert d_c((3, 0, 1), (1, 2, 1)) == 2
    assert d_c((7, 0), (0, 7)) == 7


def test_d_c_rejects_mismatch():
    with pytest.raises(ValueError):
        d_c((1, 1), (1, 1, 0))
    with pytest.raises(ValueError):
        d_c((1, 1), (1, 2))


def test_d_c_is_a_metric_exhaustively():
    comps = enumerate_compositions(3, 5)
    for a, b in combinations(comps, 2):
        assert d_c(a, b) == d_c(b, a) > 0
    for a in comps[::3]:
        for b in comps[::2]:
            for c in comps[::5]:
                assert d_c(a, c) <= d_c(a, b) + d_c(b, c)


def test_d_c_equals_n_times_type_tv():
    for a, b in combinations(enumerate_compositions(3, 6), 2):
        tv = 0.5 * sum(abs(x / 6 - y / 6) for x, y in zip(a, b))
        assert d_c(a, b) == pytest.approx(6 * tv)


def test_type_class_sizes():
    assert type_class_size((1, 1)) == 2
    assert type_class_size((2, 1, 1)) == 12
    for q, n in [(2, 9), (3, 7), (4, 5)]:
        assert sum(type_class_size(t) for t in enumerate_compositions(q, n)) == q**n


def test_type_class_size_is_big_integer():
    assert type_class_size((50, 50, 50)) == math.factorial(150) // math.factorial(50) ** 3


def test_composition_invariants():
    with pytest.raises(ValueError):
        Composition((1, -1))
    with pytest.raises(ValueError):
        Composition((3,))
    assert Composition((1, 2)) == Composition([1, 2])
    assert hash(Composition((1, 2))) == hash(Composition((1, 2)))


def test_serialization_round_trip():
    t = Composition((3, 0, 1))
    assert t.to_json() == "[3, 0, 1]"
    assert t.to_csv() == "3,0,1"
    assert parse_composition(t.to_json()) == t == parse_composition(t.to_csv())


@settings(max_examples=200, deadline=None)
@given(q=st.integers(2, 6), n=st.integers(0, 40), data=st.data())
def test_rank_unrank_inverse_property(q, n, data):
    i = data.draw(st.integers(0, lattice_size(q, n) - 1))
    t = unrank(i, q, n)
    assert t.n == n and t.q == q
    assert rank(t) == i
