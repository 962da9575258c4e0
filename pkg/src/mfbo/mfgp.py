"""Autoregressive multifidelity Gaussian process.

Level ``l`` is modeled as a scaled version of level ``l-1`` plus an
independent GP discrepancy, which induces a closed-form joint covariance
over (point, level) pairs:

    cov((x, l), (x', l')) = sum_{j=1..min(l, l')} w(l, j) w(l', j) k_j(x, x')

where ``k_j`` is the level-j squared-exponential kernel and
``w(l, j)`` is the product of the between-level scale factors from level
j up to level l (1 when j = l). All levels share a single observation
noise variance. Hyperparameters (per-level lengthscales and signal
variances, the shared noise, and the scale factors) are fitted jointly
by maximum marginal likelihood with the same multi-start strategy as the
single-fidelity model; with one level the model reduces exactly to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import ObservationSet
from .errors import DegenerateData, DimensionMismatch, LevelOutOfRange
from .gp import (
    JITTER_START,
    LENGTHSCALE_BOUNDS,
    NOISE_BOUNDS,
    SIGNAL_BOUNDS,
    KernelParams,
    _factor_with_jitter,
    kernel_matrix,
)
from .numerics import RandomStream, SpdFactor, latin_hypercube, spd_factor, spd_solve
from .search import pattern_search_adaptive

# Linear search box for the between-level scale factors.
SCALE_BOUNDS = (-5.0, 5.0)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class MfKernelParams:
    """Hyperparameters of the multifidelity covariance.

    ``kernels[j]`` holds the level-(j+1) lengthscales and signal
    variance; every entry's ``noise_variance`` is kept equal to the
    shared observation noise. ``scales`` has one between-level factor per
    adjacent pair (``scales[0]`` links levels 1 and 2).
    """

    kernels: list[KernelParams]
    scales: np.ndarray

    def __post_init__(self) -> None:
        self.scales = np.atleast_1d(np.asarray(self.scales, dtype=float)) if np.size(self.scales) else np.empty(0)
        if len(self.scales) != len(self.kernels) - 1:
            raise DimensionMismatch(
                f"{len(self.kernels)} levels need {len(self.kernels) - 1} scales, "
                f"got {len(self.scales)}"
            )

    @property
    def level_count(self) -> int:
        return len(self.kernels)

    @property
    def dim(self) -> int:
        return self.kernels[0].dim

    @property
    def noise_variance(self) -> float:
        return self.kernels[0].noise_variance

    def weight_table(self) -> np.ndarray:
        """(L+1, L+1) table with w[l, j] for 1-based level indices, 0 for j > l."""
        level_count = self.level_count
        w = np.zeros((level_count + 1, level_count + 1))
        for l in range(1, level_count + 1):
            w[l, l] = 1.0
            for j in range(l - 1, 0, -1):
                w[l, j] = w[l, j + 1] * self.scales[j - 1]
        return w


def mf_kernel_eval(params: MfKernelParams, x: np.ndarray, level: int, x2: np.ndarray, level2: int) -> float:
    """Prior covariance between (x, level) and (x2, level2).

    Raises:
        LevelOutOfRange: if either level lies outside 1..level_count.
    """
    level_count = params.level_count
    for l in (level, level2):
        if not 1 <= int(l) <= level_count:
            raise LevelOutOfRange(f"level {l} outside 1..{level_count}")
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    w = params.weight_table()
    total = 0.0
    for j in range(1, min(int(level), int(level2)) + 1):
        kj = kernel_matrix(params.kernels[j - 1], x[None, :], x2[None, :])[0, 0]
        total += w[int(level), j] * w[int(level2), j] * kj
    return float(total)


def _joint_covariance(params: MfKernelParams, x: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Noise-free joint covariance over a mixed-fidelity point set."""
    n = x.shape[0]
    w = params.weight_table()
    k = np.zeros((n, n))
    for j in range(1, params.level_count + 1):
        c = w[levels, j]
        if not np.any(c):
            continue
        k += (c[:, None] * c[None, :]) * kernel_matrix(params.kernels[j - 1], x, x)
    return k


@dataclass
class MfGpPosterior:
    """Joint posterior over all fidelity levels.

    Training rows carry 1-based model levels; targets are standardized
    jointly across levels. Predictions come back in raw target units and
    describe the latent (noise-free) process.
    """

    x_train: np.ndarray
    levels_train: np.ndarray
    y_train: np.ndarray
    params: MfKernelParams
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
        levels_train: np.ndarray,
        y_train: np.ndarray,
        params: MfKernelParams,
        y_mean: float | None = None,
        y_std: float | None = None,
    ) -> "MfGpPosterior":
        """Assemble the posterior at fixed hyperparameters.

        Jitter is relative to the top level's signal variance and
        escalates exactly as in the single-fidelity model.
        """
        x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
        levels_train = np.asarray(levels_train, dtype=int).reshape(-1)
        y_train = np.asarray(y_train, dtype=float).reshape(-1)
        if np.any(levels_train < 1) or np.any(levels_train > params.level_count):
            raise LevelOutOfRange(
                f"training levels must lie in 1..{params.level_count}"
            )
        if y_mean is None:
            y_mean = float(np.mean(y_train)) if len(y_train) else 0.0
        if y_std is None:
            s = float(np.std(y_train)) if len(y_train) else 1.0
            y_std = s if s > 1e-12 else 1.0
        n = len(y_train)
        z = (y_train - y_mean) / y_std
        base = _joint_covariance(params, x_train, levels_train)
        base += params.noise_variance * np.eye(n)
        sv_top = params.kernels[-1].signal_variance
        factor, jitter = _factor_with_jitter(base, sv_top)
        alpha = spd_solve(factor, z) if n else np.empty((0,))
        return cls(
            x_train=x_train,
            levels_train=levels_train,
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

    @property
    def level_count(self) -> int:
        return self.params.level_count

    @property
    def noise_std(self) -> float:
        """Observation noise standard deviation in raw target units."""
        return self.y_std * math.sqrt(self.params.noise_variance)

    def _check_level(self, level: int) -> int:
        level = int(level)
        if not 1 <= level <= self.level_count:
            raise LevelOutOfRange(f"level {level} outside 1..{self.level_count}")
        return level

    def _cross_rows(self, x: np.ndarray, level: int, w: np.ndarray) -> np.ndarray:
        """Prior covariances between query rows at ``level`` and the training set."""
        ks = np.zeros((x.shape[0], self.n))
        for j in range(1, level + 1):
            c_train = w[self.levels_train, j]
            if w[level, j] == 0.0 or not np.any(c_train):
                continue
            ks += (w[level, j] * c_train[None, :]) * kernel_matrix(
                self.params.kernels[j - 1], x, self.x_train
            )
        return ks

    def _prior_var(self, level: int, w: np.ndarray) -> float:
        return float(
            sum(
                w[level, j] ** 2 * self.params.kernels[j - 1].signal_variance
                for j in range(1, level + 1)
            )
        )

    def predict_level_batch(self, x: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std at each row of ``x`` for one fidelity level."""
        level = self._check_level(level)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = x.shape[0]
        w = self.params.weight_table()
        prior = self._prior_var(level, w)
        if self.n == 0:
            return np.full(m, self.y_mean), np.full(m, self.y_std * math.sqrt(prior))
        means = np.empty(m)
        stds = np.empty(m)
        chunk = max(1, int(4e7 / (8 * max(self.n, 1))))
        for start in range(0, m, chunk):
            sl = slice(start, min(start + chunk, m))
            ks = self._cross_rows(x[sl], level, w)
            v = solve_triangular(self.factor.lower, ks.T, lower=True, check_finite=False)
            var = prior - np.sum(v * v, axis=0)
            np.maximum(var, 0.0, out=var)
            means[sl] = self.y_mean + self.y_std * (ks @ self.alpha)
            stds[sl] = self.y_std * np.sqrt(var)
        return means, stds

    def predict_level(self, x: np.ndarray, level: int) -> tuple[float, float]:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"point has dim {x.shape[0]}, model has dim {self.dim}")
        mu, sd = self.predict_level_batch(x[None, :], level)
        return float(mu[0]), float(sd[0])

    def predict_with_reference(
        self, x: np.ndarray, level: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Joint statistics at ``level`` and at the top level.

        Returns ``(mean_l, std_l, mean_top, std_top, corr)`` where
        ``corr`` is the posterior correlation between the level-``level``
        and top-level latent values at the same point: exactly 1 on the
        top level, 0 wherever either standard deviation falls below
        1e-12, and clipped to [-1, 1] otherwise.
        """
        level = self._check_level(level)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = x.shape[0]
        top = self.level_count
        if level == top:
            mu, sd = self.predict_level_batch(x, top)
            return mu, sd, mu, sd, np.ones(m)
        w = self.params.weight_table()
        prior_l = self._prior_var(level, w)
        prior_top = self._prior_var(top, w)
        prior_cross = float(
            sum(
                w[level, j] * w[top, j] * self.params.kernels[j - 1].signal_variance
                for j in range(1, level + 1)
            )
        )
        means_l = np.empty(m)
        stds_l = np.empty(m)
        means_t = np.empty(m)
        stds_t = np.empty(m)
        corr = np.empty(m)
        chunk = max(1, int(2e7 / (8 * max(self.n, 1))))
        for start in range(0, m, chunk):
            sl = slice(start, min(start + chunk, m))
            if self.n:
                ks_l = self._cross_rows(x[sl], level, w)
                ks_t = self._cross_rows(x[sl], top, w)
                v_l = solve_triangular(self.factor.lower, ks_l.T, lower=True, check_finite=False)
                v_t = solve_triangular(self.factor.lower, ks_t.T, lower=True, check_finite=False)
                var_l = np.maximum(prior_l - np.sum(v_l * v_l, axis=0), 0.0)
                var_t = np.maximum(prior_top - np.sum(v_t * v_t, axis=0), 0.0)
                cross = prior_cross - np.sum(v_l * v_t, axis=0)
                means_l[sl] = self.y_mean + self.y_std * (ks_l @ self.alpha)
                means_t[sl] = self.y_mean + self.y_std * (ks_t @ self.alpha)
            else:
                var_l = np.full(sl.stop - sl.start, prior_l)
                var_t = np.full(sl.stop - sl.start, prior_top)
                cross = np.full(sl.stop - sl.start, prior_cross)
                means_l[sl] = self.y_mean
                means_t[sl] = self.y_mean
            sd_l = np.sqrt(var_l)
            sd_t = np.sqrt(var_t)
            ok = (sd_l >= 1e-12) & (sd_t >= 1e-12)
            c = np.zeros_like(sd_l)
            c[ok] = np.clip(cross[ok] / (sd_l[ok] * sd_t[ok]), -1.0, 1.0)
            stds_l[sl] = self.y_std * sd_l
            stds_t[sl] = self.y_std * sd_t
            corr[sl] = c
        return means_l, stds_l, means_t, stds_t, corr

    def with_observation(self, x: np.ndarray, level: int, y: float) -> "MfGpPosterior":
        """Posterior extended by one observation at fixed hyperparameters."""
        from .numerics import append_spd_row

        level = self._check_level(level)
        x = np.asarray(x, dtype=float).reshape(1, -1)
        w = self.params.weight_table()
        cross = self._cross_rows(x, level, w)[0] if self.n else np.empty(0)
        sv_top = self.params.kernels[-1].signal_variance
        diag = self._prior_var(level, w) + self.params.noise_variance + self.jitter * sv_top
        factor = append_spd_row(self.factor, cross, diag)
        x_new = np.vstack([self.x_train, x])
        levels_new = np.append(self.levels_train, level)
        y_new = np.append(self.y_train, float(y))
        z = (y_new - self.y_mean) / self.y_std
        alpha = spd_solve(factor, z)
        return MfGpPosterior(
            x_train=x_new,
            levels_train=levels_new,
            y_train=y_new,
            params=self.params,
            y_mean=self.y_mean,
            y_std=self.y_std,
            factor=factor,
            alpha=alpha,
            jitter=self.jitter,
            fit_log_likelihood=self.fit_log_likelihood,
        )


def posterior_correlation(g: MfGpPosterior, x: np.ndarray, level: int) -> float:
    """Posterior correlation between (x, level) and (x, top level)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    _, _, _, _, corr = g.predict_with_reference(x[None, :], level)
    return float(corr[0])


def _theta_layout(level_count: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Log-space box: per level [log lengthscales, log signal], then log noise, then scales."""
    lo_parts = []
    hi_parts = []
    for _ in range(level_count):
        lo_parts += [np.full(dim, math.log(LENGTHSCALE_BOUNDS[0])), [math.log(SIGNAL_BOUNDS[0])]]
        hi_parts += [np.full(dim, math.log(LENGTHSCALE_BOUNDS[1])), [math.log(SIGNAL_BOUNDS[1])]]
    lo_parts.append([math.log(NOISE_BOUNDS[0])])
    hi_parts.append([math.log(NOISE_BOUNDS[1])])
    if level_count > 1:
        lo_parts.append(np.full(level_count - 1, SCALE_BOUNDS[0]))
        hi_parts.append(np.full(level_count - 1, SCALE_BOUNDS[1]))
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in lo_parts]), np.concatenate(
        [np.asarray(p, dtype=float).ravel() for p in hi_parts]
    )


def _theta_to_params(theta: np.ndarray, level_count: int, dim: int) -> MfKernelParams:
    noise = math.exp(theta[level_count * (dim + 1)])
    kernels = []
    for l in range(level_count):
        base = l * (dim + 1)
        kernels.append(
            KernelParams(
                lengthscales=np.exp(theta[base : base + dim]),
                signal_variance=math.exp(theta[base + dim]),
                noise_variance=noise,
            )
        )
    scales = theta[level_count * (dim + 1) + 1 :]
    return MfKernelParams(kernels=kernels, scales=np.asarray(scales, dtype=float))


def _params_to_theta(params: MfKernelParams) -> np.ndarray:
    parts = []
    for k in params.kernels:
        parts.append(np.log(k.lengthscales))
        parts.append([math.log(k.signal_variance)])
    parts.append([math.log(params.noise_variance)])
    if params.level_count > 1:
        parts.append(params.scales)
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def _default_theta(level_count: int, dim: int) -> np.ndarray:
    parts = []
    for _ in range(level_count):
        parts.append(np.full(dim, math.log(0.3)))
        parts.append([0.0])  # log signal variance 1
    parts.append([math.log(1e-6)])
    if level_count > 1:
        parts.append(np.ones(level_count - 1))
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def _mf_lml_objective(x: np.ndarray, levels: np.ndarray, z: np.ndarray, level_count: int, dim: int):
    n = len(z)
    eye = np.eye(n)

    def objective(thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        out = np.empty(thetas.shape[0])
        for i, theta in enumerate(thetas):
            params = _theta_to_params(theta, level_count, dim)
            k = _joint_covariance(params, x, levels)
            sv_top = params.kernels[-1].signal_variance
            k += (params.noise_variance + JITTER_START * sv_top) * eye
            try:
                factor = spd_factor(k)
            except Exception:
                out[i] = -np.inf
                continue
            alpha = spd_solve(factor, z)
            out[i] = -0.5 * (z @ alpha) - 0.5 * factor.log_det() - 0.5 * n * _LOG_2PI
        return out

    return objective


def fit_mf_gp(
    data: ObservationSet,
    stream: RandomStream,
    restarts: int = 10,
    polish_iterations: int = 60,
    warm_start: MfKernelParams | None = None,
) -> MfGpPosterior:
    """Jointly fit all levels' hyperparameters by maximum marginal likelihood.

    Levels present in ``data`` must form a contiguous 1..L range with at
    least two points at level 1 and at least one point at every level.
    With L = 1 the search box, starts, and objective coincide with the
    single-fidelity fit, so the result matches ``fit_gp`` on the same
    data and stream.

    Raises:
        DegenerateData: on missing levels or insufficient points.
    """
    levels_present = data.level_set()
    if not levels_present:
        raise DegenerateData("no observations")
    level_count = max(levels_present)
    if levels_present != tuple(range(1, level_count + 1)):
        raise DegenerateData(
            f"levels present {levels_present} do not form a contiguous 1..L range"
        )
    if int(np.sum(data.levels == 1)) < 2:
        raise DegenerateData("need at least 2 observations at level 1")

    x = data.inputs
    levels = data.levels
    y = data.values
    dim = x.shape[1]

    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale < 1e-12:
        params = MfKernelParams(
            kernels=[
                KernelParams(np.full(dim, 0.3), SIGNAL_BOUNDS[0], NOISE_BOUNDS[0])
                for _ in range(level_count)
            ],
            scales=np.zeros(max(level_count - 1, 0)),
        )
        return MfGpPosterior.from_params(x, levels, y, params, y_mean=y_mean, y_std=1.0)

    z = (y - y_mean) / y_scale
    lo, hi = _theta_layout(level_count, dim)
    starts = lo + (hi - lo) * latin_hypercube(restarts, len(lo), stream)
    start_list = [starts, _default_theta(level_count, dim)[None, :]]
    if warm_start is not None:
        start_list.append(np.clip(_params_to_theta(warm_start), lo, hi)[None, :])
    all_starts = np.vstack(start_list)

    objective = _mf_lml_objective(x, levels, z, level_count, dim)
    start_vals = objective(all_starts)
    best = int(np.argmax(start_vals))

    theta, value = pattern_search_adaptive(
        objective,
        all_starts[best],
        lo,
        hi,
        max_iterations=polish_iterations,
    )
    params = _theta_to_params(theta, level_count, dim)
    posterior = MfGpPosterior.from_params(x, levels, y, params, y_mean=y_mean, y_std=y_scale)
    posterior.fit_log_likelihood = float(value)
    return posterior
