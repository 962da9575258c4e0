"""Gaussian process regression with a squared-exponential kernel.

Inputs are expected on the unit hypercube (callers normalize); targets
are standardized internally to zero mean / unit variance and predictions
are mapped back, so the hyperparameter box below is meaningful for every
benchmark regardless of its output scale.

Fitting maximizes the log marginal likelihood with a multi-start
derivative-free search: the likelihood is evaluated at Latin hypercube
starts over the log-hyperparameter box (plus one fixed default start and
an optional warm start), and the best start is polished with an adaptive
coordinate pattern search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import ObservationSet
from .errors import DegenerateData, DimensionMismatch, NotPositiveDefinite
from .numerics import RandomStream, SpdFactor, latin_hypercube, spd_factor, spd_solve
from .search import pattern_search_adaptive

# Hyperparameter box (log-space search bounds), in normalized input /
# standardized output units.
LENGTHSCALE_BOUNDS = (1e-3, 1e2)
SIGNAL_BOUNDS = (1e-8, 1e4)
NOISE_BOUNDS = (1e-10, 1e2)

# Relative diagonal jitter: start at 1e-8 * signal_variance, escalate
# tenfold up to 1e-4 * signal_variance before giving up.
JITTER_START = 1e-8
JITTER_MAX = 1e-4

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class KernelParams:
    """Squared-exponential kernel hyperparameters.

    ``lengthscales`` has one entry per input dimension (unit-cube units);
    ``signal_variance`` and ``noise_variance`` are in standardized target
    units.
    """

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self) -> None:
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        self.signal_variance = float(self.signal_variance)
        self.noise_variance = float(self.noise_variance)

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


def kernel_matrix(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel cross-covariance matrix between row sets ``a`` (m, d) and ``b`` (n, d)."""
    a = np.atleast_2d(np.asarray(a, dtype=float)) / params.lengthscales
    b = np.atleast_2d(np.asarray(b, dtype=float)) / params.lengthscales
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(params: KernelParams, x: np.ndarray, x2: np.ndarray) -> float:
    """Kernel value between two points.

    Raises:
        DimensionMismatch: if either point disagrees with the
            hyperparameter dimensionality.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.shape[0] != params.dim or x2.shape[0] != params.dim:
        raise DimensionMismatch(
            f"points have dims {x.shape[0]}/{x2.shape[0]}, kernel has dim {params.dim}"
        )
    return float(kernel_matrix(params, x[None, :], x2[None, :])[0, 0])


def _single_level_arrays(data: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
    levels = set(int(l) for l in data.levels)
    if len(levels) > 1:
        raise DimensionMismatch(
            f"expected observations at a single fidelity, got levels {sorted(levels)}"
        )
    return data.inputs, data.values


def log_marginal_likelihood(data: ObservationSet, params: KernelParams) -> float:
    """Exact log marginal likelihood of ``data`` under ``params``.

    No jitter is added here: a kernel matrix that is numerically singular
    (for example two identical inputs with zero noise) raises
    NotPositiveDefinite rather than being silently regularized.
    """
    x, y = _single_level_arrays(data)
    n = len(y)
    k = kernel_matrix(params, x, x) + params.noise_variance * np.eye(n)
    factor = spd_factor(k)
    alpha = spd_solve(factor, y)
    return float(-0.5 * (y @ alpha) - 0.5 * factor.log_det() - 0.5 * n * _LOG_2PI)


@dataclass
class GpPosterior:
    """Fitted GP posterior over one fidelity.

    Holds the training set, hyperparameters, standardization constants,
    and the Cholesky factor of the (jittered) training covariance.
    Predictions are for the latent function (no observation noise) in the
    original target units.
    """

    x_train: np.ndarray
    y_train: np.ndarray
    params: KernelParams
    y_mean: float
    y_std: float
    factor: SpdFactor = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float
    fit_log_likelihood: float | None = None

    @classmethod
    def from_params(
        cls,
        x_train: np.ndarray,
        y_train: np.ndarray,
        params: KernelParams,
        y_mean: float | None = None,
        y_std: float | None = None,
    ) -> "GpPosterior":
        """Assemble a posterior at fixed hyperparameters.

        Standardization constants default to the training targets' mean
        and population standard deviation (unit scale if degenerate).
        Jitter starts at ``JITTER_START * signal_variance`` and escalates
        tenfold until the covariance factors, up to ``JITTER_MAX``.
        """
        x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
        y_train = np.asarray(y_train, dtype=float).reshape(-1)
        if y_mean is None:
            y_mean = float(np.mean(y_train)) if len(y_train) else 0.0
        if y_std is None:
            s = float(np.std(y_train)) if len(y_train) else 1.0
            y_std = s if s > 1e-12 else 1.0
        n = len(y_train)
        z = (y_train - y_mean) / y_std
        base = kernel_matrix(params, x_train, x_train) + params.noise_variance * np.eye(n)
        factor, jitter = _factor_with_jitter(base, params.signal_variance)
        alpha = spd_solve(factor, z) if n else np.empty((0,))
        return cls(
            x_train=x_train,
            y_train=y_train,
            params=params,
            y_mean=y_mean,
            y_std=y_std,
            factor=factor,
            alpha=alpha,
            jitter=jitter,
        )

    @property
    def n(self) -> int:
        return self.x_train.shape[0]

    @property
    def dim(self) -> int:
        return self.params.dim

    def predict_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at each row of ``x``.

        Chunked so that very large query sets stay within a bounded
        memory footprint.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = x.shape[0]
        sv = self.params.signal_variance
        if self.n == 0:
            mu = np.full(m, self.y_mean)
            sd = np.full(m, self.y_std * math.sqrt(sv))
            return mu, sd
        means = np.empty(m)
        stds = np.empty(m)
        chunk = max(1, int(4e7 / (8 * max(self.n, 1))))
        for start in range(0, m, chunk):
            sl = slice(start, min(start + chunk, m))
            ks = kernel_matrix(self.params, x[sl], self.x_train)  # (c, n)
            v = solve_triangular(self.factor.lower, ks.T, lower=True, check_finite=False)
            var = sv - np.sum(v * v, axis=0)
            np.maximum(var, 0.0, out=var)
            means[sl] = self.y_mean + self.y_std * (ks @ self.alpha)
            stds[sl] = self.y_std * np.sqrt(var)
        return means, stds

    def predict(self, x: np.ndarray) -> tuple[float, float]:
        """Posterior mean and standard deviation at a single point."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"point has dim {x.shape[0]}, model has dim {self.dim}")
        mu, sd = self.predict_batch(x[None, :])
        return float(mu[0]), float(sd[0])

    def with_observation(self, x: np.ndarray, y: float) -> "GpPosterior":
        """Posterior extended by one observation at fixed hyperparameters.

        Standardization constants are kept frozen and the Cholesky factor
        grows by one bordered row (O(n^2)); used between refits.
        """
        from .numerics import append_spd_row

        x = np.asarray(x, dtype=float).reshape(1, -1)
        cross = kernel_matrix(self.params, self.x_train, x)[:, 0] if self.n else np.empty(0)
        diag = self.params.signal_variance * (1.0 + self.jitter) + self.params.noise_variance
        factor = append_spd_row(self.factor, cross, diag)
        x_new = np.vstack([self.x_train, x])
        y_new = np.append(self.y_train, float(y))
        z = (y_new - self.y_mean) / self.y_std
        alpha = spd_solve(factor, z)
        return GpPosterior(
            x_train=x_new,
            y_train=y_new,
            params=self.params,
            y_mean=self.y_mean,
            y_std=self.y_std,
            factor=factor,
            alpha=alpha,
            jitter=self.jitter,
            fit_log_likelihood=self.fit_log_likelihood,
        )


def _factor_with_jitter(base: np.ndarray, signal_variance: float) -> tuple[SpdFactor, float]:
    """Factor ``base`` with escalating relative diagonal jitter."""
    n = base.shape[0]
    if n == 0:
        return SpdFactor(lower=np.empty((0, 0))), JITTER_START
    rel = JITTER_START
    while True:
        try:
            factor = spd_factor(base + rel * signal_variance * np.eye(n))
            return factor, rel
        except NotPositiveDefinite:
            if rel >= JITTER_MAX:
                raise
            rel *= 10.0


def _theta_box(dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.concatenate([
        np.full(dim, math.log(LENGTHSCALE_BOUNDS[0])),
        [math.log(SIGNAL_BOUNDS[0]), math.log(NOISE_BOUNDS[0])],
    ])
    hi = np.concatenate([
        np.full(dim, math.log(LENGTHSCALE_BOUNDS[1])),
        [math.log(SIGNAL_BOUNDS[1]), math.log(NOISE_BOUNDS[1])],
    ])
    return lo, hi


def _theta_to_params(theta: np.ndarray, dim: int) -> KernelParams:
    return KernelParams(
        lengthscales=np.exp(theta[:dim]),
        signal_variance=math.exp(theta[dim]),
        noise_variance=math.exp(theta[dim + 1]),
    )


def _params_to_theta(params: KernelParams) -> np.ndarray:
    return np.concatenate([
        np.log(params.lengthscales),
        [math.log(params.signal_variance), math.log(params.noise_variance)],
    ])


def _lml_objective(x: np.ndarray, z: np.ndarray, dim: int):
    """Batch objective over log-hyperparameters; failed factorizations score -inf."""
    n = len(z)
    eye = np.eye(n)

    def objective(thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        out = np.empty(thetas.shape[0])
        for i, theta in enumerate(thetas):
            params = _theta_to_params(theta, dim)
            k = kernel_matrix(params, x, x)
            k += (params.noise_variance + JITTER_START * params.signal_variance) * eye
            try:
                factor = spd_factor(k)
            except NotPositiveDefinite:
                out[i] = -np.inf
                continue
            alpha = spd_solve(factor, z)
            out[i] = -0.5 * (z @ alpha) - 0.5 * factor.log_det() - 0.5 * n * _LOG_2PI
        return out

    return objective


_DEFAULT_START = {"lengthscale": 0.3, "signal_variance": 1.0, "noise_variance": 1e-6}


def fit_gp(
    data: ObservationSet,
    stream: RandomStream,
    restarts: int = 10,
    polish_iterations: int = 60,
    warm_start: KernelParams | None = None,
) -> GpPosterior:
    """Fit a GP to single-fidelity data by maximum marginal likelihood.

    Draws ``restarts`` Latin hypercube starts over the log-hyperparameter
    box, adds a fixed default start and the optional ``warm_start``,
    evaluates the (jittered) likelihood at each, and polishes the best
    with an adaptive pattern search. The attained likelihood is therefore
    at least the likelihood at every start point. Deterministic given the
    stream.

    Raises:
        DegenerateData: fewer than two observations.
    """
    x, y = _single_level_arrays(data)
    n = len(y)
    if n < 2:
        raise DegenerateData(f"need at least 2 observations to fit, got {n}")
    dim = x.shape[1]

    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale < 1e-12:
        # All targets identical: fall back to a flat posterior at the
        # parameter floor rather than failing.
        params = KernelParams(
            lengthscales=np.full(dim, _DEFAULT_START["lengthscale"]),
            signal_variance=SIGNAL_BOUNDS[0],
            noise_variance=NOISE_BOUNDS[0],
        )
        return GpPosterior.from_params(x, y, params, y_mean=y_mean, y_std=1.0)

    z = (y - y_mean) / y_scale
    lo, hi = _theta_box(dim)
    starts = lo + (hi - lo) * latin_hypercube(restarts, dim + 2, stream)
    default = _params_to_theta(
        KernelParams(
            lengthscales=np.full(dim, _DEFAULT_START["lengthscale"]),
            signal_variance=_DEFAULT_START["signal_variance"],
            noise_variance=_DEFAULT_START["noise_variance"],
        )
    )
    start_list = [starts, default[None, :]]
    if warm_start is not None:
        start_list.append(np.clip(_params_to_theta(warm_start), lo, hi)[None, :])
    all_starts = np.vstack(start_list)

    objective = _lml_objective(x, z, dim)
    start_vals = objective(all_starts)
    best = int(np.argmax(start_vals))

    theta, value = pattern_search_adaptive(
        objective,
        all_starts[best],
        lo,
        hi,
        max_iterations=polish_iterations,
    )
    params = _theta_to_params(theta, dim)
    posterior = GpPosterior.from_params(x, y, params, y_mean=y_mean, y_std=y_scale)
    posterior.fit_log_likelihood = float(value)
    return posterior
