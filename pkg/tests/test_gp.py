"""Single-fidelity GP: kernel values, likelihood, posterior, fitting."""

import math

import numpy as np
import pytest

from mfbo.dataset import ObservationSet
from mfbo.errors import DegenerateData, DimensionMismatch, NotPositiveDefinite
from mfbo.gp import (
    GpPosterior,
    KernelParams,
    NOISE_BOUNDS,
    SIGNAL_BOUNDS,
    fit_gp,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
)
from mfbo.numerics import RandomStream


def make_data(x, y, level=1):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    data = ObservationSet(dim=x.shape[1])
    for xi, yi in zip(x, np.asarray(y, dtype=float)):
        data.append(xi, level, yi)
    return data


class TestKernel:
    def test_pinned_value(self):
        # sv * exp(-0.5 * ((0.3-0.7)/0.5)^2) = 2 * exp(-0.32)
        params = KernelParams(lengthscales=[0.5], signal_variance=2.0, noise_variance=0.0)
        assert kernel_eval(params, [0.3], [0.7]) == pytest.approx(
            1.4522980741473817, abs=1e-15
        )

    def test_diagonal_is_signal_variance(self):
        params = KernelParams(lengthscales=[0.2, 0.4], signal_variance=3.5, noise_variance=0.1)
        assert kernel_eval(params, [0.3, 0.9], [0.3, 0.9]) == pytest.approx(3.5)

    def test_symmetric_and_positive(self):
        params = KernelParams(lengthscales=[0.3, 0.7], signal_variance=1.0, noise_variance=0.0)
        a = np.array([[0.1, 0.2], [0.8, 0.9], [0.4, 0.4]])
        k = kernel_matrix(params, a, a)
        assert np.allclose(k, k.T)
        assert np.all(k > 0.0)
        assert np.all(k <= 1.0 + 1e-15)

    def test_anisotropic_lengthscales(self):
        params = KernelParams(lengthscales=[0.1, 10.0], signal_variance=1.0, noise_variance=0.0)
        near = kernel_eval(params, [0.0, 0.0], [0.0, 0.5])  # long-lengthscale move
        far = kernel_eval(params, [0.0, 0.0], [0.5, 0.0])  # short-lengthscale move
        assert near > 0.99
        assert far < 1e-5

    def test_dimension_mismatch(self):
        params = KernelParams(lengthscales=[0.5], signal_variance=1.0, noise_variance=0.0)
        with pytest.raises(DimensionMismatch):
            kernel_eval(params, [0.1, 0.2], [0.3])


class TestLogMarginalLikelihood:
    def test_two_point_oracle(self):
        # K = [[1.1, e^-0.5], [e^-0.5, 1.1]], y = (0.5, -0.5):
        # -0.5 y' K^-1 y - 0.5 log|K| - log(2 pi)
        data = make_data([[0.0], [1.0]], [0.5, -0.5])
        params = KernelParams(lengthscales=[1.0], signal_variance=1.0, noise_variance=0.1)
        assert log_marginal_likelihood(data, params) == pytest.approx(
            -2.258578107275534, abs=1e-12
        )

    def test_no_silent_jitter(self):
        # duplicate inputs with zero noise make the kernel matrix singular
        data = make_data([[0.4], [0.4]], [1.0, 1.0])
        params = KernelParams(lengthscales=[0.5], signal_variance=1.0, noise_variance=0.0)
        with pytest.raises(NotPositiveDefinite):
            log_marginal_likelihood(data, params)

    def test_rejects_mixed_levels(self):
        data = ObservationSet(dim=1)
        data.append([0.1], 1, 0.0)
        data.append([0.9], 2, 1.0)
        params = KernelParams(lengthscales=[0.5], signal_variance=1.0, noise_variance=0.1)
        with pytest.raises(DimensionMismatch):
            log_marginal_likelihood(data, params)


class TestPosterior:
    def test_noiseless_interpolation(self):
        x = np.linspace(0.0, 1.0, 7)[:, None]
        y = np.sin(3.0 * x[:, 0]) * 4.0 + 2.0
        params = KernelParams(lengthscales=[0.3], signal_variance=1.0, noise_variance=0.0)
        post = GpPosterior.from_params(x, y, params)
        mu, sd = post.predict_batch(x)
        assert np.max(np.abs(mu - y)) < 1e-6
        assert np.max(sd) < 1e-3

    def test_reverts_to_prior_far_away(self):
        x = np.array([[0.5]])
        y = np.array([10.0])
        params = KernelParams(lengthscales=[0.01], signal_variance=1.0, noise_variance=0.0)
        post = GpPosterior.from_params(x, y, params, y_mean=0.0, y_std=2.0)
        mu, sd = post.predict(np.array([0.99]))
        assert mu == pytest.approx(0.0, abs=1e-8)
        assert sd == pytest.approx(2.0, rel=1e-6)  # y_std * sqrt(sv)

    def test_standardization_round_trip(self):
        # predictions come back in original units whatever the target scale;
        # the long lengthscale makes the kernel matrix ill-conditioned, so
        # the bound reflects jitter, not standardization error
        x = np.linspace(0.0, 1.0, 9)[:, None]
        y = 500.0 + 120.0 * np.cos(2.0 * x[:, 0])
        params = KernelParams(lengthscales=[0.4], signal_variance=1.5, noise_variance=1e-8)
        post = GpPosterior.from_params(x, y, params)
        mu, _ = post.predict_batch(x)
        assert np.max(np.abs(mu - y)) < 1e-2

    def test_predict_single_point_matches_batch(self):
        x = np.array([[0.2, 0.3], [0.7, 0.8]])
        y = np.array([1.0, -2.0])
        params = KernelParams(lengthscales=[0.5, 0.5], signal_variance=1.0, noise_variance=0.01)
        post = GpPosterior.from_params(x, y, params)
        q = np.array([0.4, 0.6])
        mu_b, sd_b = post.predict_batch(q[None, :])
        mu_s, sd_s = post.predict(q)
        assert mu_s == mu_b[0] and sd_s == sd_b[0]

    def test_predict_dim_mismatch(self):
        post = GpPosterior.from_params(
            np.array([[0.1]]),
            np.array([1.0]),
            KernelParams(lengthscales=[0.5], signal_variance=1.0, noise_variance=0.1),
        )
        with pytest.raises(DimensionMismatch):
            post.predict(np.array([0.1, 0.2]))

    def test_empty_training_set_gives_prior(self):
        params = KernelParams(lengthscales=[0.3], signal_variance=4.0, noise_variance=0.0)
        post = GpPosterior.from_params(
            np.empty((0, 1)), np.empty(0), params, y_mean=1.5, y_std=3.0
        )
        mu, sd = post.predict(np.array([0.5]))
        assert mu == 1.5
        assert sd == pytest.approx(3.0 * 2.0)

    def test_with_observation_matches_rebuild(self):
        stream = RandomStream(5)
        x = stream.uniform(size=(6, 2))
        y = np.sin(x[:, 0] * 3.0) + x[:, 1]
        params = KernelParams(lengthscales=[0.4, 0.4], signal_variance=1.0, noise_variance=1e-6)
        post = GpPosterior.from_params(x, y, params)

        x_new = np.array([0.55, 0.25])
        y_new = 0.8
        grown = post.with_observation(x_new, y_new)
        rebuilt = GpPosterior.from_params(
            np.vstack([x, x_new[None, :]]),
            np.append(y, y_new),
            params,
            y_mean=post.y_mean,
            y_std=post.y_std,
        )
        q = stream.uniform(size=(20, 2))
        mu_g, sd_g = grown.predict_batch(q)
        mu_r, sd_r = rebuilt.predict_batch(q)
        assert np.max(np.abs(mu_g - mu_r)) < 1e-10
        assert np.max(np.abs(sd_g - sd_r)) < 1e-10

    def test_with_observation_chain(self):
        params = KernelParams(lengthscales=[0.5], signal_variance=1.0, noise_variance=1e-4)
        post = GpPosterior.from_params(np.array([[0.1], [0.9]]), np.array([0.0, 1.0]), params)
        for xv, yv in [(0.3, 0.2), (0.6, 0.7), (0.45, 0.4)]:
            post = post.with_observation(np.array([xv]), yv)
        assert post.n == 5
        mu, _ = post.predict(np.array([0.45]))
        assert mu == pytest.approx(0.4, abs=0.05)

    def test_variance_never_negative(self):
        # near-duplicate training points stress the subtracted-variance form
        x = np.array([[0.5], [0.5 + 1e-9], [0.7]])
        y = np.array([1.0, 1.0, 2.0])
        params = KernelParams(lengthscales=[0.3], signal_variance=2.0, noise_variance=0.0)
        post = GpPosterior.from_params(x, y, params)
        _, sd = post.predict_batch(np.linspace(0, 1, 50)[:, None])
        assert np.all(sd >= 0.0)


class TestFit:
    def test_needs_two_points(self):
        with pytest.raises(DegenerateData):
            fit_gp(make_data([[0.5]], [1.0]), RandomStream(0))

    def test_interpolates_after_fit(self):
        x = np.linspace(0.0, 1.0, 10)[:, None]
        y = np.sin(5.0 * x[:, 0])
        post = fit_gp(make_data(x, y), RandomStream(3))
        mu, _ = post.predict_batch(x)
        assert np.max(np.abs(mu - y)) < 1e-3

    def test_hyperparameter_recovery(self):
        # draw a noisy path from a known kernel, refit, require all three
        # hyperparameters back within a factor of two; the signal variance
        # estimate has wide sampling spread at n=40, so the seed pins one
        # representative draw
        gen = KernelParams(lengthscales=[0.1], signal_variance=1.0, noise_variance=0.0)
        stream = RandomStream(104)
        x = np.sort(stream.uniform(size=(40, 1)), axis=0)
        k = kernel_matrix(gen, x, x) + 1e-10 * np.eye(40)
        f = np.linalg.cholesky(k) @ stream.standard_normal(40)
        y = f + 0.05 * stream.standard_normal(40)  # noise variance 2.5e-3

        post = fit_gp(make_data(x, y), RandomStream(7))
        ls = float(post.params.lengthscales[0])
        sv = post.params.signal_variance * post.y_std**2
        nv = post.params.noise_variance * post.y_std**2
        assert 0.05 <= ls <= 0.2
        assert 0.5 <= sv <= 2.0
        assert 1.25e-3 <= nv <= 5e-3

    def test_fit_attains_every_start(self):
        # the polished likelihood can never fall below the default start
        x = np.linspace(0.0, 1.0, 12)[:, None]
        y = np.cos(4.0 * x[:, 0]) * 2.0
        data = make_data(x, y)
        post = fit_gp(data, RandomStream(1))
        default = KernelParams(lengthscales=[0.3], signal_variance=1.0, noise_variance=1e-6)
        z_data = make_data(x, (y - np.mean(y)) / np.std(y))
        # compare in standardized units with the fit's own jitter floor
        jittered = KernelParams(
            lengthscales=default.lengthscales,
            signal_variance=default.signal_variance,
            noise_variance=default.noise_variance + 1e-8 * default.signal_variance,
        )
        assert post.fit_log_likelihood >= log_marginal_likelihood(z_data, jittered) - 1e-9

    def test_deterministic_given_stream(self):
        x = np.linspace(0.0, 1.0, 8)[:, None]
        y = x[:, 0] ** 2
        a = fit_gp(make_data(x, y), RandomStream(9))
        b = fit_gp(make_data(x, y), RandomStream(9))
        assert np.array_equal(a.params.lengthscales, b.params.lengthscales)
        assert a.params.signal_variance == b.params.signal_variance
        assert a.params.noise_variance == b.params.noise_variance
        assert a.fit_log_likelihood == b.fit_log_likelihood

    def test_warm_start_is_honored(self):
        x = np.linspace(0.0, 1.0, 8)[:, None]
        y = np.sin(3.0 * x[:, 0])
        warm = KernelParams(lengthscales=[0.25], signal_variance=1.2, noise_variance=1e-5)
        post = fit_gp(make_data(x, y), RandomStream(2), warm_start=warm)
        z = (y - np.mean(y)) / np.std(y)
        warm_jittered = KernelParams(
            lengthscales=warm.lengthscales,
            signal_variance=warm.signal_variance,
            noise_variance=warm.noise_variance + 1e-8 * warm.signal_variance,
        )
        assert post.fit_log_likelihood >= log_marginal_likelihood(
            make_data(x, z), warm_jittered
        ) - 1e-9

    def test_flat_targets_fall_back(self):
        x = np.linspace(0.0, 1.0, 6)[:, None]
        y = np.full(6, 7.25)
        post = fit_gp(make_data(x, y), RandomStream(0))
        mu, sd = post.predict(np.array([0.33]))
        assert mu == pytest.approx(7.25, abs=1e-6)
        assert sd < 1e-3
        assert post.params.signal_variance == SIGNAL_BOUNDS[0]
        assert post.params.noise_variance == NOISE_BOUNDS[0]

    def test_rejects_mixed_levels(self):
        data = ObservationSet(dim=1)
        data.append([0.1], 1, 0.0)
        data.append([0.9], 2, 1.0)
        with pytest.raises(DimensionMismatch):
            fit_gp(data, RandomStream(0))
