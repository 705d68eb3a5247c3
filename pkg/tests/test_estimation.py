import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from svtfair import (
    NoiseConfig,
    ObservationMatrix,
    ShrinkageFn,
    SynthConfig,
    ValidationError,
    gen_ground_truth,
    impute_zeros,
    mask_uniform,
    mse_vs_truth,
    svt,
    usvt_threshold,
)


def obs_with_exact_fraction(m, n, n_observed, seed=0):
    """Observation matrix with an exact |Omega| for threshold arithmetic."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(m * n, dtype=bool)
    flat[rng.permutation(m * n)[:n_observed]] = True
    mask = flat.reshape(m, n)
    values = rng.uniform(-1, 1, (m, n))
    return ObservationMatrix.from_observed(values, mask)


class TestImputeZeros:
    def test_fully_observed_unchanged(self):
        values = np.array([[0.1, -0.2], [0.3, 0.4]])
        obs = ObservationMatrix.fully_observed(values)
        np.testing.assert_array_equal(impute_zeros(obs), values)

    def test_fully_missing_is_zero(self):
        obs = ObservationMatrix.from_observed(
            np.ones((3, 3)), np.zeros((3, 3), dtype=bool)
        )
        np.testing.assert_array_equal(impute_zeros(obs), np.zeros((3, 3)))

    def test_single_observed_cell(self):
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, 0] = True
        obs = ObservationMatrix.from_observed(np.full((2, 2), 0.5), mask)
        np.testing.assert_array_equal(impute_zeros(obs), [[0.5, 0.0], [0.0, 0.0]])

    def test_returns_copy(self):
        obs = ObservationMatrix.fully_observed(np.zeros((2, 2)))
        imputed = impute_zeros(obs)
        imputed[0, 0] = 1.0
        assert obs.values[0, 0] == 0.0


class TestUsvtThreshold:
    def test_plain_formula(self):
        # m=200, n=800, p_hat exactly 0.2 -> sqrt(2.01 * 800 * 0.2)
        obs = obs_with_exact_fraction(200, 800, 32000)
        assert obs.p_hat == 0.2
        # sqrt(321.6), frozen from independent arithmetic
        assert usvt_threshold(obs, w=2.01) == pytest.approx(17.9332094, abs=1e-6)

    def test_variance_refinement_fully_observed(self):
        obs = ObservationMatrix.fully_observed(np.zeros((10, 20)))
        # p_hat = 1 so q_hat collapses to the variance bound
        assert usvt_threshold(obs, w=2.0, noise_var=0.25) == pytest.approx(
            np.sqrt(2.0 * 20 * 0.25)
        )
        assert usvt_threshold(obs, w=2.0, noise_var=0.0) == 0.0

    def test_empty_mask_rejected(self):
        obs = ObservationMatrix.from_observed(
            np.zeros((3, 3)), np.zeros((3, 3), dtype=bool)
        )
        with pytest.raises(ValidationError, match="no observations"):
            usvt_threshold(obs)

    def test_parameter_validation(self):
        obs = ObservationMatrix.fully_observed(np.zeros((2, 2)))
        with pytest.raises(ValidationError):
            usvt_threshold(obs, w=0.0)
        with pytest.raises(ValidationError):
            usvt_threshold(obs, noise_var=1.5)


class TestSvt:
    def rank_one(self):
        u = np.full(10, 1 / np.sqrt(10))
        v = np.full(16, 1 / np.sqrt(16))
        return ObservationMatrix.fully_observed(10.0 * np.outer(u, v))

    def test_single_component_above_threshold(self):
        obs = self.rank_one()
        est = svt(obs, tau=5.0, psi=ShrinkageFn.identity(), clip=False)
        assert est.rank_kept == 1
        np.testing.assert_allclose(est.a_hat_unclipped, obs.values, atol=1e-10)
        assert est.result is est.a_hat_unclipped

    def test_all_components_removed(self):
        obs = self.rank_one()
        est = svt(obs, tau=15.0)
        assert est.rank_kept == 0
        np.testing.assert_array_equal(est.a_hat, np.zeros(obs.shape))

    def test_strict_inequality_at_boundary(self):
        obs = ObservationMatrix.fully_observed(np.diag([0.9, 0.5, 0.2]))
        est = svt(obs, tau=0.5)
        assert est.rank_kept == 1  # sigma = 0.5 is excluded

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(6)
        obs = ObservationMatrix.fully_observed(rng.uniform(-1, 1, (12, 8)))
        taus = sorted(rng.uniform(0, 3, size=5))
        kept = [set(svt(obs, t).kept_set.tolist()) for t in taus]
        for small, large in zip(kept[:-1], kept[1:]):
            assert large <= small

    def test_identity_zero_threshold_reconstructs(self):
        rng = np.random.default_rng(9)
        values = rng.uniform(-1, 1, (9, 7))
        obs = ObservationMatrix.fully_observed(values)
        est = svt(obs, tau=0.0, psi=ShrinkageFn.identity(), clip=False)
        assert np.linalg.norm(est.a_hat_unclipped - values) < 1e-6

    def test_clip_invariants(self):
        rng = np.random.default_rng(10)
        obs = ObservationMatrix.fully_observed(rng.uniform(-1, 1, (8, 8)))
        est = svt(obs, tau=0.1, psi=ShrinkageFn.linear(3.0))
        np.testing.assert_array_equal(est.a_hat, np.clip(est.a_hat_unclipped, -1, 1))
        assert np.abs(est.a_hat).max() <= 1.0
        # clipping is idempotent
        np.testing.assert_array_equal(np.clip(est.a_hat, -1, 1), est.a_hat)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValidationError):
            svt(self.rank_one(), tau=-1.0)

    def test_usvt_rank_stays_near_cluster_count(self):
        # generator + SVT at experiment scale: kept rank <= 3c across seeds
        c = 10
        for seed in range(10):
            cfg = SynthConfig(m=200, n=800, c=c, seed=seed)
            truth, _ = gen_ground_truth(cfg)
            obs = mask_uniform(truth, 0.2, cfg.noise, seed + 100)
            tau = usvt_threshold(obs, w=2.01, noise_var=0.01**2)
            est = svt(obs, tau, ShrinkageFn.linear(1 / obs.p_hat))
            assert est.rank_kept <= 3 * c


class TestShrinkage:
    def test_kinds(self):
        assert ShrinkageFn.identity()(3.0) == 3.0
        np.testing.assert_allclose(
            ShrinkageFn.linear(2.5)(np.array([1.0, 2.0])), [2.5, 5.0]
        )
        assert ShrinkageFn.identity().slope == 1.0
        assert ShrinkageFn.linear(0.5).slope == 0.5

    def test_validation(self):
        with pytest.raises(ValidationError):
            ShrinkageFn.linear(0.0)
        with pytest.raises(ValidationError):
            ShrinkageFn("linear")
        with pytest.raises(ValidationError):
            ShrinkageFn("identity", beta=1.0)
        with pytest.raises(ValidationError):
            ShrinkageFn("cubic")

    @settings(max_examples=30, deadline=None)
    @given(
        x=arrays(np.float64, (8,), elements=st.floats(0, 100)),
        beta=st.floats(0.01, 10),
    )
    def test_increasing(self, x, beta):
        xs = np.sort(x)
        for fn in (ShrinkageFn.identity(), ShrinkageFn.linear(beta)):
            ys = np.asarray(fn(xs))
            assert (np.diff(ys) >= 0).all()


class TestMse:
    def test_exact_match_is_zero(self):
        a = np.full((3, 4), 0.25)
        assert mse_vs_truth(a, a) == 0.0

    def test_unit_gap(self):
        assert mse_vs_truth(np.ones((2, 2)), np.zeros((2, 2))) == 1.0

    def test_unobserved_scope(self):
        truth = np.zeros((2, 2))
        pred = np.array([[1.0, 0.0], [0.0, 3.0]])
        mask = np.array([[True, True], [True, False]])
        assert mse_vs_truth(pred, truth, observed_mask=mask) == 9.0

    def test_full_mask_rejected(self):
        a = np.zeros((2, 2))
        with pytest.raises(ValidationError, match="empty test set"):
            mse_vs_truth(a, a, observed_mask=np.ones((2, 2), dtype=bool))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            mse_vs_truth(np.zeros((2, 2)), np.zeros((2, 3)))
