import math

import numpy as np
import pytest

from votelasso.datagen import (
    ProblemSpec,
    ar1_cholesky,
    compute_c_omega,
    make_theta_star,
    sample_responses,
    sample_shards,
    stream,
    theta_min_from_snr,
)


def _spec(**kw):
    base = dict(d=20, K=3, M=4, n=50, r=0.5, base_seed=7)
    base.update(kw)
    return ProblemSpec(**base)


class TestProblemSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            _spec(d=1)
        with pytest.raises(ValueError):
            _spec(K=0)
        with pytest.raises(ValueError):
            _spec(K=20)  # K must be < d
        with pytest.raises(ValueError):
            _spec(r=0.0)
        with pytest.raises(ValueError):
            _spec(corr_decay=1.0)
        with pytest.raises(ValueError):
            _spec(sigma=-1.0)
        with pytest.raises(ValueError):
            _spec(sigma="weird")

    def test_sigma_from_r(self):
        assert _spec(r=0.25).sigma_value() == pytest.approx(2.0)
        assert _spec(sigma=3.0).sigma_value() == 3.0


class TestAr1Cholesky:
    def test_independent_design_is_identity(self):
        assert np.array_equal(ar1_cholesky(2, 0.0), np.eye(2))

    def test_hand_computed_2x2(self):
        L = ar1_cholesky(2, 0.5)
        assert L[0, 0] == 1.0
        assert L[1, 0] == pytest.approx(0.5)
        assert L[1, 1] == pytest.approx(math.sqrt(0.75))

    @pytest.mark.parametrize("d,s", [(5, 0.5), (37, 0.5), (12, 0.9)])
    def test_reconstructs_covariance(self, d, s):
        L = ar1_cholesky(d, s)
        idx = np.arange(d)
        Sigma = s ** np.abs(idx[:, None] - idx[None, :])
        assert np.abs(L @ L.T - Sigma).max() <= 1e-12


class TestSampleShards:
    def test_deterministic(self):
        spec = _spec()
        a = sample_shards(spec)
        b = sample_shards(spec)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.X, sb.X)

    def test_machines_differ(self):
        shards = sample_shards(_spec(M=2))
        assert not np.array_equal(shards[0].X, shards[1].X)

    def test_row_prefix_consistency_across_n(self):
        # Larger draws extend smaller ones row-for-row (needed by n-sweeps).
        spec = _spec()
        small = sample_shards(spec, n=20)
        large = sample_shards(spec, n=50)
        assert np.array_equal(large[0].X[:20], small[0].X)

    def test_column_means_near_zero(self):
        spec = _spec(d=5, M=10, n=10_000, corr_decay=0.0)
        shards = sample_shards(spec)
        pooled = np.vstack([s.X for s in shards])
        se = 1.0 / math.sqrt(pooled.shape[0])
        assert np.abs(pooled.mean(axis=0)).max() <= 4 * se

    def test_pooled_covariance_converges(self):
        spec = _spec(d=10, M=10, n=10_000)
        pooled = np.vstack([s.X for s in sample_shards(spec)])
        emp = pooled.T @ pooled / pooled.shape[0]
        idx = np.arange(10)
        Sigma = 0.5 ** np.abs(idx[:, None] - idx[None, :])
        assert np.abs(emp - Sigma).max() <= 0.05


class TestMakeThetaStar:
    def test_k1_degenerates_to_theta_min(self):
        truth = make_theta_star(_spec(K=1), theta_min=0.37)
        nz = truth.theta_star[truth.theta_star != 0]
        assert nz.size == 1
        assert abs(nz[0]) == pytest.approx(0.37)

    def test_equally_spaced_magnitudes(self):
        truth = make_theta_star(_spec(K=5), theta_min=0.2)
        mags = np.sort(np.abs(truth.theta_star[truth.support]))
        assert np.allclose(mags, [0.20, 0.25, 0.30, 0.35, 0.40])

    def test_construction_invariants(self):
        for seed in range(5):
            spec = _spec(K=4, base_seed=seed)
            truth = make_theta_star(spec, theta_min=0.5)
            assert truth.support.size == spec.K
            assert np.array_equal(np.sort(truth.support), truth.support)
            mags = np.abs(truth.theta_star[truth.support])
            assert mags.min() == pytest.approx(0.5)  # planted at equality
            assert np.all(mags <= 2 * 0.5 + 1e-15)
            assert set(np.flatnonzero(truth.theta_star)) == set(truth.support)


class TestThetaMinFromSnr:
    def test_frozen_value(self):
        # sigma sqrt(2 (c/n) r ln d) at sigma=1, r=0.5, n=250, d=5000, c=1.3
        val = theta_min_from_snr(5000, 1.0, 0.5, 250, 1.3)
        assert val == pytest.approx(0.2104505, abs=5e-6)

    def test_vanishes_with_r(self):
        assert theta_min_from_snr(5000, 1.0, 1e-12, 250, 1.3) < 1e-5

    def test_sqrt_homogeneity_in_c_omega(self):
        base = theta_min_from_snr(100, 1.0, 0.5, 50, 1.0)
        assert theta_min_from_snr(100, 1.0, 0.5, 50, 4.0) == pytest.approx(2 * base)

    def test_monotonicity(self):
        args = dict(d=200, sigma=1.0, r=0.5, n=100, c_omega=1.5)
        base = theta_min_from_snr(**args)
        assert theta_min_from_snr(**{**args, "sigma": 2.0}) > base
        assert theta_min_from_snr(**{**args, "r": 0.9}) > base
        assert theta_min_from_snr(**{**args, "c_omega": 2.5}) > base
        assert theta_min_from_snr(**{**args, "d": 2000}) > base
        assert theta_min_from_snr(**{**args, "n": 400}) < base


class TestSampleResponses:
    def test_noiseless_limit(self):
        spec = _spec()
        shards = sample_shards(spec)
        truth = make_theta_star(spec, 0.5)
        filled = sample_responses(shards, truth.theta_star, 1e-12, spec.base_seed)
        for s in filled:
            assert np.abs(s.y - s.X @ truth.theta_star).max() <= 1e-9

    def test_noise_variance(self):
        spec = _spec(d=2, K=1, M=10, n=10_000)
        shards = sample_shards(spec)
        filled = sample_responses(shards, np.zeros(2), 1.7, spec.base_seed)
        pooled = np.concatenate([s.y for s in filled])
        assert abs(pooled.var() / 1.7**2 - 1.0) <= 0.05

    def test_deterministic(self):
        spec = _spec()
        shards = sample_shards(spec)
        a = sample_responses(shards, np.zeros(spec.d), 1.0, spec.base_seed)
        b = sample_responses(shards, np.zeros(spec.d), 1.0, spec.base_seed)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.y, sb.y)

    def test_rep_streams_differ(self):
        spec = _spec()
        shards = sample_shards(spec)
        a = sample_responses(shards, np.zeros(spec.d), 1.0, spec.base_seed, rep=0)
        b = sample_responses(shards, np.zeros(spec.d), 1.0, spec.base_seed, rep=1)
        assert not np.array_equal(a[0].y, b[0].y)


class TestComputeCOmega:
    def test_identity_machine(self):
        assert compute_c_omega([np.ones(4)]) == 1.0

    def test_max_across_machines(self):
        assert compute_c_omega([np.array([1.0, 1.3]), np.array([0.9, 1.1])]) == 1.3

    def test_dominates_every_entry(self, rng):
        diags = [rng.uniform(0.5, 2.0, size=6) for _ in range(3)]
        c = compute_c_omega(diags)
        for v in diags:
            assert c >= v.max()

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="no machines"):
            compute_c_omega([])


def test_streams_are_tag_separated():
    a = stream(5, 1, 0).standard_normal(8)
    b = stream(5, 2, 0).standard_normal(8)
    assert not np.array_equal(a, b)
