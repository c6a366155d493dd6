import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmfimpute.anmf import AdditiveFactorization
from nmfimpute.errors import MaskError
from nmfimpute.imputation import (
    MaskedVector,
    fit_h_masked,
    impute_matrix,
    impute_point,
    impute_point_additive,
    masked_objective,
)
from nmfimpute.matrix import partition_rows
from nmfimpute.nmf import Factorization, SolverConfig

from oracles import central_difference, grouped_dictionary, projected_gradient_nnls

RANK1_W = np.array([[1.0], [2.0], [3.0]])
RANK1_X = MaskedVector([2.0, 4.0, 0.0], [True, True, False])
TIGHT = SolverConfig(rel_tol=1e-12, max_iters=20000)


def one_missing(x, i):
    m = np.ones(len(x), bool)
    m[i] = False
    return MaskedVector(np.where(m, x, 0.0), m)


class TestFitHMasked:
    def test_rank1_closed_form(self):
        # h = (Wo^T xo) / (Wo^T Wo) = 10 / 5
        h, tr = fit_h_masked(RANK1_X, RANK1_W, TIGHT)
        assert h[0, 0] == pytest.approx(2.0, rel=1e-10)
        assert tr.final < 1e-18

    def test_all_observed_full_rank(self):
        rng = np.random.default_rng(0)
        W = rng.random((6, 3))
        x = W @ (rng.random(3) + 0.2)
        h, tr = fit_h_masked(MaskedVector(x, np.ones(6, bool)), W, TIGHT)
        assert 0.5 * np.sum((W @ h[:, 0] - x) ** 2) < 1e-8

    def test_all_missing_rejected(self):
        with pytest.raises(MaskError):
            fit_h_masked(MaskedVector([1.0, 2.0, 3.0], [False] * 3), RANK1_W)

    def test_zero_observed_vector_collapses(self):
        h, _ = fit_h_masked(MaskedVector([0.0, 0.0, 5.0], [True, True, False]), RANK1_W)
        assert h[0, 0] < 1e-6

    def test_reduced_objective_monotone(self):
        rng = np.random.default_rng(1)
        W = rng.random((8, 12))
        x = rng.random(8)
        _, tr = fit_h_masked(one_missing(x, 3), W, SolverConfig(max_iters=500, rel_tol=1e-15))
        assert np.all(np.diff(tr.objective_values) <= 1e-12)

    def test_matches_nnls_oracle(self):
        rng = np.random.default_rng(2)
        W = rng.random((7, 3))
        x = rng.random(7)
        mv = one_missing(x, 0)
        h, tr = fit_h_masked(mv, W, SolverConfig(rel_tol=1e-14, max_iters=50000))
        M = mv.mask.astype(float)[:, None]
        _, ref = projected_gradient_nnls(W, x[:, None], M, iters=20000)
        assert abs(tr.final - ref[0]) <= 1e-9


class TestImputePoint:
    def test_rank1(self):
        res = impute_point(RANK1_X, RANK1_W, TIGHT)
        np.testing.assert_allclose(res.completed, [2.0, 4.0, 6.0], rtol=1e-10)
        assert res.completed[0] == 2.0 and res.completed[1] == 4.0

    def test_all_observed_unchanged(self):
        x = np.array([0.3, 0.0, 1.7])
        res = impute_point(MaskedVector(x, [True] * 3), RANK1_W)
        assert np.array_equal(res.completed, x)

    def test_planted_overcomplete_recovery(self):
        rng = np.random.default_rng(3)
        W = grouped_dictionary(rng, d=10, r=20)
        x = W @ rng.random(20)
        res = impute_point(one_missing(x, 4), W, SolverConfig(max_iters=3000, rel_tol=1e-14))
        assert abs(res.completed[4] - x[4]) <= 1e-3 * x[4]

    def test_trace_is_joint_objective_at_stationary_missing_block(self):
        rng = np.random.default_rng(4)
        W = rng.random((5, 8))
        mv = one_missing(rng.random(5), 2)
        cfg = SolverConfig(max_iters=30, rel_tol=1e-15)
        res = impute_point(mv, W, cfg)
        h = res.h[0][:, 0]
        est = (W @ h)[~mv.mask]
        assert res.trace.final == pytest.approx(masked_objective(mv, W, h, est), rel=1e-12)

    def test_joint_objective_sequence_monotone(self):
        # Replay the iteration h_n and evaluate the two-block objective with
        # the missing block assigned from h_n.
        rng = np.random.default_rng(5)
        W = rng.random((6, 9))
        mv = one_missing(rng.random(6), 5)
        values = []
        for n in range(1, 60):
            h = impute_point(mv, W, SolverConfig(max_iters=n, rel_tol=1e-15)).h[0][:, 0]
            values.append(masked_objective(mv, W, h, (W @ h)[~mv.mask]))
        assert np.all(np.diff(values) <= 1e-12)

    def test_reduced_gradient_identity(self):
        # with the missing block at W_mis h the gradient of the two-block
        # objective w.r.t. h is -Wo^T (xo - Wo h)
        rng = np.random.default_rng(6)
        W = rng.random((6, 4))
        mv = one_missing(rng.random(6), 1)
        h = rng.random(4)
        est = (W @ h)[~mv.mask]
        fd = central_difference(lambda hh: masked_objective(mv, W, hh[:, 0], est), h[:, None])[:, 0]
        p = partition_rows(W, mv.mask)
        xo = mv.values[mv.mask]
        reduced = -p.observed_rows.T @ (xo - p.observed_rows @ h)
        assert np.linalg.norm(fd - reduced) / np.linalg.norm(reduced) <= 1e-6

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
    def test_placeholders_never_matter(self, seed, junk):
        rng = np.random.default_rng(seed)
        W = rng.random((6, 4))
        x = rng.random(6)
        mask = np.array([True, False, True, False, True, False])
        a = x.copy()
        b = x.copy()
        b[~mask] = junk
        cfg = SolverConfig(max_iters=50)
        ra = impute_point(MaskedVector(a, mask), W, cfg)
        # MaskedVector only validates observed entries, so junk may be negative
        rb = impute_point(MaskedVector(b, mask), W, cfg)
        assert np.array_equal(ra.completed, rb.completed)
        assert ra.trace.objective_values == rb.trace.objective_values

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_observed_entries_bit_equal(self, seed):
        rng = np.random.default_rng(seed)
        W = rng.random((7, 5))
        x = rng.random(7) * 10
        mask = rng.random(7) > 0.4
        mask[0] = True
        res = impute_point(MaskedVector(x, mask), W, SolverConfig(max_iters=20))
        assert np.array_equal(res.completed[mask], x[mask])
        assert res.completed.min() >= 0


class TestAdditive:
    def test_k1_matches_impute_point(self):
        rng = np.random.default_rng(7)
        W = rng.random((6, 4))
        mv = one_missing(rng.random(6), 2)
        F = AdditiveFactorization([Factorization(W, np.ones((4, 1)))])
        cfg = SolverConfig(max_iters=200, seed=3)
        a = impute_point(mv, W, cfg, point=5)
        b = impute_point_additive(mv, F, cfg, point=5)
        assert np.array_equal(a.completed, b.completed)
        assert a.trace.objective_values == b.trace.objective_values

    def test_zero_second_term(self):
        rng = np.random.default_rng(8)
        W = rng.random((6, 4))
        mv = one_missing(rng.random(6), 0)
        F = AdditiveFactorization([Factorization(W, np.ones((4, 1))),
                                   Factorization(np.zeros((6, 3)), np.ones((3, 1)))])
        cfg = SolverConfig(max_iters=200)
        a = impute_point(mv, W, cfg)
        b = impute_point_additive(mv, F, cfg)
        assert np.array_equal(a.completed, b.completed)

    def test_planted_additive_recovery(self):
        rng = np.random.default_rng(9)
        Ws = [grouped_dictionary(rng, d=10, r=8) for _ in range(2)]
        x = sum(W @ rng.random(8) for W in Ws)
        F = AdditiveFactorization([Factorization(W, np.ones((8, 1))) for W in Ws])
        res = impute_point_additive(one_missing(x, 7), F, SolverConfig(max_iters=5000, rel_tol=1e-14))
        assert abs(res.completed[7] - x[7]) <= 1e-2 * x[7]

    def test_additive_objective_monotone(self):
        rng = np.random.default_rng(10)
        F = AdditiveFactorization([Factorization(rng.random((6, 3)), np.ones((3, 1))) for _ in range(3)])
        mv = one_missing(rng.random(6), 3)
        res = impute_point_additive(mv, F, SolverConfig(max_iters=300, rel_tol=1e-15))
        assert np.all(np.diff(res.trace.objective_values) <= 1e-12)


class TestMaskedObjective:
    def test_stationary_estimate_collapses_to_reduced(self):
        rng = np.random.default_rng(11)
        W = rng.random((5, 3))
        mv = one_missing(rng.random(5), 2)
        h = rng.random(3)
        p = partition_rows(W, mv.mask)
        reduced = 0.5 * np.sum((mv.values[mv.mask] - p.observed_rows @ h) ** 2)
        assert masked_objective(mv, W, h, p.missing_rows @ h) == pytest.approx(reduced, rel=1e-14)

    def test_zero_h(self):
        x = np.array([1.0, 2.0, 2.0])
        assert masked_objective(MaskedVector(x, [True] * 3), RANK1_W, [0.0], []) == pytest.approx(4.5)

    def test_matches_two_term_sum(self):
        rng = np.random.default_rng(12)
        W = rng.random((6, 4))
        mask = np.array([True, False, True, True, False, True])
        x = rng.random(6)
        h = rng.random(4)
        est = rng.random(2)
        total = 0.0
        k = 0
        for i in range(6):
            pred = sum(W[i, a] * h[a] for a in range(4))
            if mask[i]:
                total += (x[i] - pred) ** 2
            else:
                total += (est[k] - pred) ** 2
                k += 1
        assert masked_objective(MaskedVector(x, mask), W, h, est) == pytest.approx(total / 2, rel=1e-13)


class TestBatch:
    def test_fully_observed_batch_is_identity(self):
        X = np.random.default_rng(13).random((3, 4))
        pts = [MaskedVector(c, [True] * 3) for c in X.T]
        out = impute_matrix(pts, RANK1_W)
        assert np.array_equal(out.completed, X)

    def test_replicated_rank1(self):
        out = impute_matrix([RANK1_X] * 5, RANK1_W, TIGHT)
        np.testing.assert_allclose(out.completed, np.tile([[2.0], [4.0], [6.0]], 5), rtol=1e-10)

    def test_matches_pointwise_loop(self):
        rng = np.random.default_rng(14)
        W = rng.random((6, 9))
        pts = [MaskedVector(rng.random(6), rng.random(6) > 0.3) for _ in range(8)]
        pts = [p for p in pts if p.mask.any()]
        cfg = SolverConfig(max_iters=300, seed=2)
        out = impute_matrix(pts, W, cfg)
        for j, p in enumerate(pts):
            assert np.array_equal(out.completed[:, j], impute_point(p, W, cfg, point=j).completed)

    def test_bad_point_collected(self):
        pts = [RANK1_X, MaskedVector([1.0, 1.0, 1.0], [False] * 3), RANK1_X]
        out = impute_matrix(pts, RANK1_W)
        assert list(out.errors) == [1]
        assert np.isnan(out.completed[:, 1]).all()
        assert not np.isnan(out.completed[:, [0, 2]]).any()
        with pytest.raises(MaskError, match="point 1"):
            impute_matrix(pts, RANK1_W, fail_fast=True)


def test_overcomplete_recovery_beats_zero_substitution():
    # generic planted instances with r > d: masked entries end up closer to
    # the truth than zero substitution in at least 90% of instances
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        W = rng.random((8, 16))
        X = W @ rng.random((16, 10))
        ours, zero = [], []
        for j in range(10):
            i = rng.integers(8)
            res = impute_point(one_missing(X[:, j], i), W, SolverConfig(max_iters=500), point=j)
            ours.append(abs(res.completed[i] - X[i, j]))
            zero.append(X[i, j])
        wins += np.mean(ours) < np.mean(zero)
    assert wins >= 18
