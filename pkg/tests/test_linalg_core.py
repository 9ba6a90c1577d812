import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pnml_ood import DegenerateTraining, EmbeddingMatrix, InvalidInput, build_stats, decompose, project_orth

from conftest import stats_of


class TestEmbeddingMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInput, match="row 1"):
            EmbeddingMatrix([[1.0, 2.0], [np.nan, 0.0]])

    def test_rejects_empty(self):
        with pytest.raises(InvalidInput):
            EmbeddingMatrix(np.zeros((0, 3)))

    def test_normalized_flag_checked(self):
        EmbeddingMatrix([[0.6, 0.8]], normalized=True)
        with pytest.raises(InvalidInput):
            EmbeddingMatrix([[3.0, 4.0]], normalized=True)

    def test_immutable(self):
        e = EmbeddingMatrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            e.data[0, 0] = 5.0


class TestDecompose:
    def test_identity(self):
        b = decompose(np.eye(2))
        np.testing.assert_allclose(b.eigvals, [1.0, 1.0])
        assert b.rank == 2

    def test_diagonal_rank_one(self):
        b = decompose([[2.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(b.eigvals, [4.0, 0.0])
        assert b.rank == 1
        np.testing.assert_allclose(b.eigvecs[:, 0], [1.0, 0.0])

    def test_tall_identity_rows(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(X.T @ X, np.eye(2))
        b = decompose(X)
        np.testing.assert_allclose(b.eigvals, [1.0, 1.0])
        assert b.rank == 2

    def test_orthonormal_sorted_nonnegative(self, rng):
        X = rng.standard_normal((30, 6)) @ rng.standard_normal((6, 8))
        b = decompose(X)
        np.testing.assert_allclose(b.eigvecs.T @ b.eigvecs, np.eye(8), atol=1e-8)
        assert np.all(np.diff(b.eigvals) <= 0)
        assert np.all(b.eigvals >= 0)
        assert b.rank == 6

    def test_sign_convention(self, rng):
        b = decompose(rng.standard_normal((10, 5)))
        idx = np.argmax(np.abs(b.eigvecs), axis=0)
        assert np.all(b.eigvecs[idx, np.arange(5)] > 0)

    def test_rank_tolerance_cuts_small_eigenvalues(self):
        X = np.array([[1.0, 0.0], [0.0, 1e-3], [1.0, 0.0]])
        assert decompose(X).rank == 2
        # lam = (2, 1e-6); cutoff = factor * 2 * 3
        assert decompose(X, rank_tol_factor=1e-7).rank == 2
        assert decompose(X, rank_tol_factor=1e-6).rank == 1

    def test_bad_inputs(self):
        with pytest.raises(InvalidInput):
            decompose([[np.inf, 0.0]])
        with pytest.raises(InvalidInput):
            decompose(np.eye(2), rank_tol_factor=0.0)

    def test_row_permutation_invariance(self, rng):
        X = rng.standard_normal((40, 7))
        a = decompose(X).eigvals
        b = decompose(X[rng.permutation(40)]).eigvals
        np.testing.assert_allclose(a, b, atol=1e-8)


class TestBuildStats:
    def test_identity(self):
        s = stats_of(np.eye(2))
        np.testing.assert_allclose(s.quad_kernel, np.eye(2))
        np.testing.assert_allclose(s.row_proj, np.eye(2))

    def test_diagonal(self):
        # pinv([[2,0],[0,0]]) = [[0.5,0],[0,0]]
        s = stats_of([[2.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(s.quad_kernel, np.diag([0.25, 0.0]), atol=1e-15)
        np.testing.assert_allclose(s.row_proj, np.diag([1.0, 0.0]), atol=1e-15)

    def test_rank_zero_warns_and_returns_zeros(self):
        with pytest.warns(DegenerateTraining):
            s = stats_of(np.zeros((3, 2)))
        assert s.degenerate
        assert not s.quad_kernel.any() and not s.row_proj.any()

    def test_full_rank_matches_direct_inverse(self, rng):
        for _ in range(20):
            X = rng.standard_normal((50, 6))
            s = stats_of(X)
            direct = np.linalg.inv(X.T @ X)
            err = np.linalg.norm(s.quad_kernel - direct) / np.linalg.norm(direct)
            assert err < 1e-6

    @pytest.mark.parametrize("shape,rank", [((30, 5), 5), ((4, 9), 4), ((20, 8), 3)])
    def test_penrose_conditions(self, rng, shape, rank):
        n, m = shape
        X = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, m))
        s = stats_of(X)
        P = s.quad_kernel @ X.T  # candidate pinv(X)
        np.testing.assert_allclose(X @ P @ X, X, atol=1e-6)
        np.testing.assert_allclose(P @ X @ P, P, atol=1e-6)
        np.testing.assert_allclose((X @ P).T, X @ P, atol=1e-6)
        np.testing.assert_allclose((P @ X).T, P @ X, atol=1e-6)
        np.testing.assert_allclose(P, np.linalg.pinv(X), atol=1e-6)

    def test_invariants(self, rng):
        X = rng.standard_normal((12, 3)) @ rng.standard_normal((3, 6))
        s = stats_of(X)
        P, K = s.row_proj, s.quad_kernel
        assert np.abs(P @ P - P).max() <= 1e-6
        np.testing.assert_allclose(K, K.T, atol=1e-8)
        assert np.linalg.eigvalsh(K).min() >= -1e-8
        np.testing.assert_allclose(K @ (X.T @ X) @ K, K, atol=1e-6)


class TestProjectOrth:
    def test_full_rank(self):
        np.testing.assert_allclose(project_orth([3.0, 4.0], stats_of(np.eye(2))), [0.0, 0.0])

    def test_partial_span(self):
        s = stats_of([[1.0, 0.0], [2.0, 0.0]])
        np.testing.assert_allclose(project_orth([1.0, 1.0], s), [0.0, 1.0])

    def test_zero(self, rng):
        s = stats_of(rng.standard_normal((3, 5)))
        np.testing.assert_array_equal(project_orth(np.zeros(5), s), np.zeros(5))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            project_orth([1.0, 2.0, 3.0], stats_of(np.eye(2)))

    def test_orthogonal_to_training_rows(self, rng):
        for _ in range(20):
            X = rng.standard_normal((4, 9))
            s = stats_of(X)
            x = rng.standard_normal(9)
            xp = project_orth(x, s)
            dots = np.abs(X @ xp)
            assert np.all(dots <= 1e-8 * np.linalg.norm(x) * np.linalg.norm(X, axis=1))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-10, 10)))
def test_projector_idempotent_property(X):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateTraining)
        s = build_stats(decompose(X), 6)
    assert np.abs(s.row_proj @ s.row_proj - s.row_proj).max() <= 1e-6
