import math

import numpy as np
import pytest

from permch.compositions import enumerate_compositions
from permch.lattice_dist import d_ab
from permch.multinomial import (
    MultinomialSpec,
    binomial_diff_bound,
    binomial_pmf,
    binomial_successive_diff,
    bound_sweep,
    check_kl_bound,
    check_peak,
    check_tail_bound,
    full_dist,
    peak_bound,
    pmf,
    pmf_grid,
    sample,
    write_sweep_csv,
)


def test_pmf_point_mass_row():
    spec = MultinomialSpec(5, (0.0, 1.0, 0.0))
    for t in enumerate_compositions(3, 5):
        assert pmf(spec, t.counts) == (1.0 if t.counts == (0, 5, 0) else 0.0)


def test_pmf_binomial_special_case():
    assert pmf(MultinomialSpec(2, (0.5, 0.5)), (1, 1)) == pytest.approx(0.5, rel=1e-14)
    for t in range(8):
        exact = math.comb(7, t) * 0.3**t * 0.7 ** (7 - t)
        assert pmf(MultinomialSpec(7, (0.7, 0.3)), (7 - t, t)) == pytest.approx(exact, rel=1e-12)


def test_pmf_normalizes(rng):
    spec = MultinomialSpec(6, tuple(rng.dirichlet(np.ones(3))))
    total = math.fsum(pmf(spec, t.counts) for t in enumerate_compositions(3, 6))
    assert abs(total - 1) <= 1e-10


def test_grid_matches_pointwise(rng):
    u = rng.dirichlet(np.ones(3))
    grid = pmf_grid(7, u)
    spec = MultinomialSpec(7, tuple(u))
    for t in enumerate_compositions(3, 7):
        assert grid[t.counts[0], t.counts[1]] == pytest.approx(pmf(spec, t.counts), rel=1e-12)


def test_full_dist_matches_sampling(rng):
    spec = MultinomialSpec(20, (0.2, 0.5, 0.3))
    D = full_dist(spec)
    draws = sample(spec, 20000, rng)
    for t in [(4, 10, 6), (3, 11, 6), (5, 9, 6)]:
        freq = np.all(draws == t, axis=1).mean()
        sigma = math.sqrt(D[t] * (1 - D[t]) / 20000)
        assert abs(freq - D[t]) <= 3 * sigma


def test_spec_validation():
    with pytest.raises(ValueError):
        MultinomialSpec(3, (0.5, 0.6))
    with pytest.raises(ValueError):
        MultinomialSpec(-1, (0.5, 0.5))


def test_kl_bound_equality_case():
    p, b, ok = check_kl_bound(MultinomialSpec(12, (0.0, 1.0)), (0, 12))
    assert p == 1.0 and b == pytest.approx(1.0) and ok


@pytest.mark.parametrize("n,u", [(20, (0.7, 0.3)), (15, (0.5, 0.3, 0.2))])
def test_kl_bound_exhaustive(n, u):
    spec = MultinomialSpec(n, u)
    assert all(check_kl_bound(spec, t.counts)[2] for t in enumerate_compositions(len(u), n))


def test_peak_examples():
    peak, bound, ok = check_peak(MultinomialSpec(4, (0.5, 0.5)))
    assert peak == pytest.approx(0.375, rel=1e-14) and bound == pytest.approx(2.0) and ok
    n, p = 50, 0.3
    assert peak_bound(MultinomialSpec(n, (1 - p, p))) == pytest.approx(2 / (math.sqrt(n) * math.sqrt(p * (1 - p))))
    assert peak_bound(MultinomialSpec(9, (0.0, 1.0, 0.0))) == 2.0


def test_tail_examples():
    assert check_tail_bound(MultinomialSpec(50, (0.5, 0.5)), 2).ok
    assert check_tail_bound(MultinomialSpec(30, (1 / 3, 1 / 3, 1 / 3)), 3).ok
    rep = check_tail_bound(MultinomialSpec(20, (0.0, 1.0)), 2)
    assert rep.ok
    with pytest.raises(ValueError):
        check_tail_bound(MultinomialSpec(20, (0.5, 0.5)), 1)


def test_binomial_successive_difference():
    assert binomial_successive_diff(2, 0.5) == pytest.approx(1.0, abs=1e-15)
    v = binomial_successive_diff(10, 0.3)
    assert abs(v - 2 * binomial_pmf(10, 0.3).max()) <= 1e-12
    with pytest.raises(ValueError):
        binomial_successive_diff(5, 1.0)


def test_binomial_difference_bound_grid():
    for n in range(4, 257):
        for p in np.arange(1, 10) / 10:
            assert binomial_successive_diff(n, p) <= binomial_diff_bound(n, p)


def test_d_ab_outside_support_is_two():
    for n in range(1, 8):
        Q = full_dist(MultinomialSpec(n, (0.6, 0.4, 0.0)))
        assert d_ab(Q, 0, 2) == pytest.approx(2.0, abs=1e-12)
        assert d_ab(Q, 1, 2) == pytest.approx(2.0, abs=1e-12)


def test_sweep_csv(tmp_path):
    rows = bound_sweep(2, [10, 11], [(0.4, 0.6)])
    assert rows and all(r.passed for r in rows)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, str(path))
    header = path.read_text().splitlines()[0]
    assert header == "n,q,u,check_name,max_ratio,pass"
