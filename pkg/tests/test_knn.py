import numpy as np
import pytest

from svtfair import KnnConfig, ValidationError, adjusted_cosine_similarity, knn_predict, knn_predict_all
from svtfair.knn import similarity_to_row


def scalar_similarity(b, i, j):
    """Loop-based adjusted cosine, independent of the vectorized path."""
    b = np.asarray(b, dtype=float)
    m, n = b.shape
    col_means = [sum(b[r][k] for r in range(m)) / m for k in range(n)]
    ci = [b[i][k] - col_means[k] for k in range(n)]
    cj = [b[j][k] - col_means[k] for k in range(n)]
    dot = sum(x * y for x, y in zip(ci, cj))
    ni = sum(x * x for x in ci) ** 0.5
    nj = sum(y * y for y in cj) ** 0.5
    if ni == 0 or nj == 0:
        return 0.0
    return dot / (ni * nj)


class TestAdjustedCosine:
    def test_two_row_matrix_gives_minus_one(self):
        # rows (1,0,1) and (0,1,0): column means 0.5 each, centered rows are
        # negatives of each other
        b = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        assert adjusted_cosine_similarity(b, 0, 1) == pytest.approx(-1.0)

    def test_self_similarity_is_one(self):
        b = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
        assert adjusted_cosine_similarity(b, 0, 0) == pytest.approx(1.0)

    def test_orthogonal_centered_rows(self):
        b = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])  # column means 0
        assert adjusted_cosine_similarity(b, 0, 1) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_row_is_zero(self):
        b = np.array([[0.0, 0.0], [1.0, 1.0], [-1.0, -1.0]])  # row 0 == column means
        assert adjusted_cosine_similarity(b, 0, 1) == 0.0

    def test_symmetry_and_bound(self):
        rng = np.random.default_rng(4)
        b = rng.uniform(-1, 1, (8, 6))
        for _ in range(20):
            i, j = rng.integers(0, 8, 2)
            s = adjusted_cosine_similarity(b, i, j)
            assert s == adjusted_cosine_similarity(b, j, i)
            assert abs(s) <= 1 + 1e-12

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(5)
        b = rng.uniform(-1, 1, (6, 5))
        for i in range(6):
            for j in range(6):
                assert adjusted_cosine_similarity(b, i, j) == pytest.approx(
                    scalar_similarity(b, i, j), abs=1e-12
                )

    def test_bad_index(self):
        with pytest.raises(IndexError):
            adjusted_cosine_similarity(np.ones((2, 2)), 0, 2)


class TestKnnPredict:
    def test_identical_rows_fall_back_to_column_means(self):
        b = np.tile([0.3, -0.2, 0.8], (5, 1))
        pred = knn_predict(b, 0, KnnConfig(k=2))
        np.testing.assert_allclose(pred, [0.3, -0.2, 0.8])

    def test_duplicate_dominates_hand_computed_average(self):
        # m = k + 1: one perfect duplicate of row 0 plus dissimilar rows
        b = np.array(
            [
                [0.5, 0.0, 0.5],
                [0.5, 0.0, 0.5],
                [-0.5, 0.5, -0.5],
                [0.0, -0.5, 0.25],
            ]
        )
        cfg = KnnConfig(k=3)
        sims = [scalar_similarity(b, 0, j) for j in range(1, 4)]
        assert sims[0] == pytest.approx(1.0)
        assert sims[0] > max(abs(sims[1]), abs(sims[2]))
        weight_total = sum(abs(s) for s in sims)
        expected = [
            sum(sims[j - 1] * b[j][kk] for j in range(1, 4)) / weight_total
            for kk in range(3)
        ]
        np.testing.assert_allclose(knn_predict(b, 0, cfg), expected, atol=1e-12)

    def test_invariant_under_permuting_non_neighbors(self):
        rng = np.random.default_rng(9)
        base = rng.uniform(-1, 1, 4)
        b = np.vstack(
            [
                base,
                base + 0.01 * rng.uniform(-1, 1, 4),
                base + 0.01 * rng.uniform(-1, 1, 4),
                rng.uniform(-1, 1, 4) * -1,
                rng.uniform(-1, 1, 4) * -1,
                rng.uniform(-1, 1, 4) * -1,
            ]
        )
        cfg = KnnConfig(k=2)
        sims = similarity_to_row(b, 0)
        # the two near-duplicates must be the selected neighbours
        assert set(np.argsort(-sims[1:])[:2] + 1) == {1, 2}
        before = knn_predict(b, 0, cfg)
        shuffled = b.copy()
        shuffled[[3, 4, 5]] = shuffled[[5, 3, 4]]
        np.testing.assert_array_equal(before, knn_predict(shuffled, 0, cfg))

    def test_k_must_be_smaller_than_m(self):
        with pytest.raises(ValidationError):
            knn_predict(np.ones((3, 2)), 0, KnnConfig(k=3))
        with pytest.raises(ValidationError):
            KnnConfig(k=0)


class TestKnnPredictAll:
    def test_matches_single_row_predictions(self):
        rng = np.random.default_rng(11)
        b = rng.uniform(-1, 1, (13, 7))
        cfg = KnnConfig(k=4)
        full = knn_predict_all(b, cfg, chunk=5)
        for i in range(13):
            np.testing.assert_allclose(full[i], knn_predict(b, i, cfg), atol=1e-12)
