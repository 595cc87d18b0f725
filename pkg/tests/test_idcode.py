import numpy as np
import pytest

from permch.channel import Dmc, qncc_kernel, random_dmc
from permch.compositions import Composition, enumerate_compositions
from permch.idcode import (
    IdCode,
    achievability_parameters,
    build_reliable_code,
    build_set_system,
    converse_tv_bound,
    deterministic_id_code,
    eval_id_errors,
    grid_codewords,
    monte_carlo_id_errors,
    packing_min_distance,
    random_sigma_code,
    reduce_to_composition_code,
    sigma_errors_exhaustive,
    stochastic_id_code,
    SigmaCode,
)


def test_set_system_worked_example():
    sys = build_set_system(100, 0.1, 0.7, seed=3)
    assert sys.condition_lam and sys.condition_eps
    assert sys.L >= 6 and sys.subset_size == 10
    assert sys.max_intersection <= 7 and sys.verify()


def test_set_system_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_set_system(100, 0.2, 0.9)
    with pytest.raises(ValueError):
        build_set_system(100, 0.1, 0.5)


def test_set_system_reports_search_failure():
    with pytest.raises(RuntimeError):
        build_set_system(7, 0.15, 0.85, target=8, max_tries=200)


def test_noiseless_reliable_code():
    U = Dmc.identity(2)
    rel = build_reliable_code(U, 12, 1)
    assert rel.N == 13 and rel.exact_pe() == 0


def test_nearest_decoder_on_identity():
    rel = build_reliable_code(Dmc.identity(3), 6, 2, decoder="nearest")
    assert rel.exact_pe(qncc_kernel(Dmc.identity(3), 6)) == 0


def test_grid_codewords():
    assert [c.counts for c in grid_codewords(2, 10, 4)] == [(0, 10), (4, 6), (8, 2)]
    with pytest.raises(ValueError):
        grid_codewords(2, 10, 0)


def test_reliable_code_n16_exact_matches_monte_carlo():
    U = Dmc.bsc(0.1)
    rel = build_reliable_code(U, 16, 5)
    exact = rel.exact_errors()
    mc = rel.monte_carlo(U, 20000, seed=2)
    sigma = np.sqrt(exact * (1 - exact) / 20000)
    assert np.all(np.abs(mc.rates - exact) <= 3 * sigma + 1e-12)
    assert np.all(mc.low <= mc.rates) and np.all(mc.rates <= mc.high)


def test_message_count_grows_with_n():
    # Spacing proportional to sqrt(n log n) keeps the error fixed; N grows like sqrt(n / log n).
    counts = []
    for n in (64, 256, 1024):
        d = int(np.ceil(1.2 * np.sqrt(n * np.log2(n))))
        counts.append(len(grid_codewords(2, n, d)))
    assert counts[0] < counts[1] < counts[2]


def test_noiseless_stochastic_code_error_split():
    U = Dmc.identity(2)
    rel = build_reliable_code(U, 20, 1)
    sys = build_set_system(rel.N, 0.1, 0.7, seed=0, target=4)
    K = qncc_kernel(U, 20)
    errs = eval_id_errors(stochastic_id_code(rel, sys), K)
    assert errs.lam1 == 0
    assert errs.lam2 <= sys.overlap_ratio() + 1e-15


def test_stochastic_code_identifies_more_messages_than_it_transmits():
    U = Dmc.identity(2)
    rel = build_reliable_code(U, 99, 1)
    sys = build_set_system(rel.N, 0.1, 0.7, seed=0, target=rel.N + 5)
    code = stochastic_id_code(rel, sys)
    assert code.L > rel.N


def test_stochastic_exact_matches_monte_carlo():
    U = Dmc.bsc(0.1)
    K = qncc_kernel(U, 16)
    rel = build_reliable_code(U, 16, 2, kernel=K)
    sys = build_set_system(rel.N, 0.12, 0.99, seed=1, target=3)
    code = stochastic_id_code(rel, sys)
    exact = eval_id_errors(code, K)
    mc, se = monte_carlo_id_errors(code, U, 20000, seed=4)
    assert np.all(np.abs(mc.accept - exact.accept) <= 3 * se + 1e-3)


def test_deterministic_code_errors():
    K = qncc_kernel(Dmc.identity(2), 10)
    det = deterministic_id_code(build_reliable_code(Dmc.identity(2), 10, 3, kernel=K))
    e = eval_id_errors(det, K)
    assert e.lam1 == 0 and e.lam2 == 0
    assert np.all(det.acceptance.sum(axis=0) <= 1)


def test_deterministic_code_bsc():
    U = Dmc.bsc(0.1)
    K = qncc_kernel(U, 64)
    rel = build_reliable_code(U, 64, 12, kernel=K)
    e = eval_id_errors(deterministic_id_code(rel), K)
    pe = rel.exact_pe(K)
    assert e.lam1 <= pe + 1e-12 and e.lam2 <= pe + 1e-12
    assert e.lam1 + e.lam2 <= 2 * rel.monte_carlo(U, 5000, seed=0).high.max()


def test_eval_total_probability():
    K = qncc_kernel(Dmc.bsc(0.2), 6)
    size = len(K.compositions)
    enc = np.zeros((2, size))
    enc[:, 2] = 1.0
    acc = np.zeros((2, size))
    acc[0, :3] = 1.0
    acc[1] = 1.0 - acc[0]
    e = eval_id_errors(IdCode(2, 6, enc, acc), K)
    assert e.matrix[0, 0] + e.matrix[1, 0] == pytest.approx(1.0, abs=1e-14)


def test_id_errors_match_monte_carlo_n12():
    U = Dmc.bsc(0.2)
    K = qncc_kernel(U, 12)
    code = deterministic_id_code(build_reliable_code(U, 12, 4, kernel=K))
    exact = eval_id_errors(code, K)
    mc, se = monte_carlo_id_errors(code, U, 20000, seed=9)
    assert np.all(np.abs(mc.accept - exact.accept) <= 3 * se + 1e-3)


def test_converse_identical_encoders():
    K = qncc_kernel(Dmc.bsc(0.2), 5)
    enc = np.zeros((2, 6))
    enc[:, 1] = 1.0
    b = converse_tv_bound(IdCode(2, 5, enc, np.ones((2, 6))), K)
    assert b.value == 1.0 and b.min_tv == 0


def test_converse_clamps_far_codewords():
    K = qncc_kernel(Dmc.bsc(0.001), 10)
    det = deterministic_id_code(build_reliable_code(Dmc.bsc(0.001), 10, 10, kernel=K))
    b = converse_tv_bound(det, K)
    assert b.value == 0 and b.raw < 0


def test_converse_adjacent_codewords_bsc03():
    U = Dmc.bsc(0.3)
    K = qncc_kernel(U, 32)
    rel = build_reliable_code(U, 32, 1, kernel=K)
    code = deterministic_id_code(rel)
    b = converse_tv_bound(code, K)
    e = eval_id_errors(code, K)
    assert b.value > 0
    assert b.value <= e.lam1 + e.lam2


def test_packing_examples(rng):
    res = packing_min_distance(enumerate_compositions(2, 10))
    assert res.min_distance == 1 and res.bound == pytest.approx(20 / 11) and res.ok
    comps = enumerate_compositions(3, 9)
    for _ in range(20):
        pick = [comps[i] for i in rng.choice(len(comps), size=9, replace=False)]
        assert packing_min_distance(pick).ok
    with pytest.raises(ValueError):
        packing_min_distance(comps[:8])


def test_achievability_parameters():
    eps_p, lam_p = achievability_parameters(1024, 2, 4.0, 0.001)
    assert eps_p == pytest.approx(2 * 0.001 + 1 / 1024 + 10 / 1024)
    assert lam_p == pytest.approx(4 / np.log2(1 / eps_p))


def test_reduction_preserves_errors(rng):
    for q, n in [(2, 3), (2, 5), (3, 3)]:
        for _ in range(3):
            U = random_dmc(q, rng)
            sc = random_sigma_code(q, n, 3, rng)
            a = sigma_errors_exhaustive(sc, U)
            b = eval_id_errors(reduce_to_composition_code(sc), qncc_kernel(U, n))
            assert np.abs(a.matrix - b.matrix).max() <= 1e-12


def test_reduction_of_symmetric_decoders_is_deterministic(rng):
    from permch.idcode import _vector_ranks

    ranks = _vector_ranks(2, 4)
    dec = np.stack([np.isin(ranks, [0, 2]).astype(float), np.isin(ranks, [1]).astype(float)])
    enc = np.zeros((2, 16))
    enc[0, ranks == 2] = 1 / (ranks == 2).sum()
    enc[1, 5] = 1.0
    code = reduce_to_composition_code(SigmaCode(2, 4, enc, dec))
    assert set(np.unique(code.acceptance)) <= {0.0, 1.0}
    assert code.encoders[0, 2] == pytest.approx(1.0)
    assert np.count_nonzero(code.encoders[1]) == 1


def test_code_json_round_trip():
    K = qncc_kernel(Dmc.bsc(0.2), 6)
    code = deterministic_id_code(build_reliable_code(Dmc.bsc(0.2), 6, 3, kernel=K))
    back = IdCode.from_json(code.to_json())
    assert np.array_equal(back.encoders, code.encoders)
    assert np.array_equal(back.acceptance, code.acceptance)


def test_idcode_validation():
    with pytest.raises(ValueError):
        IdCode(2, 1, np.array([[0.5, 0.4]]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        IdCode(2, 1, np.array([[1.0, 0.0]]), np.array([[1.5, 0.0]]))
    assert Composition((1, 0)) in enumerate_compositions(2, 1)
