"""Single-fidelity acquisition functions and their maximizer.

All acquisitions follow the minimization convention: the incumbent is
the best (lowest) observed value and improvement means going below it.
Each has a moment-space core taking (mean, std) arrays directly, used by
the derivative-identity tests and the batched maximizer, plus a thin
posterior-facing wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import EmptyInput
from .gp import GpPosterior
from .numerics import RandomStream, norm_cdf, norm_logcdf, norm_pdf

# Below this posterior standard deviation the model is treated as exact
# and every acquisition takes its deterministic limit.
STD_FLOOR = 1e-12

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Incumbent:
    """Best observed point so far (minimization)."""

    location: np.ndarray
    value: float


@dataclass(frozen=True)
class MesSettings:
    """Controls for the min-value sampler."""

    num_min_samples: int = 10
    grid_size: int = 100


def ei_score(mean, std, best) -> np.ndarray:
    """Expected improvement below ``best`` for normal beliefs, elementwise.

    With z = (best - mean) / std this is std * (z * cdf(z) + pdf(z)); as
    std -> 0 it degenerates to max(best - mean, 0), which is used
    verbatim below the std floor.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    out = np.maximum(best - mean, 0.0)
    ok = std >= STD_FLOOR
    if np.any(ok):
        z = (best - mean[ok]) / std[ok]
        out[ok] = std[ok] * (z * norm_cdf(z) + norm_pdf(z))
    np.maximum(out, 0.0, out=out)
    return out


def pi_score(mean, std, best) -> np.ndarray:
    """Probability of improvement below ``best``, elementwise.

    Below the std floor it is the indicator of mean < best (0.5 at a tie).
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    out = np.where(mean < best, 1.0, np.where(mean > best, 0.0, 0.5))
    ok = std >= STD_FLOOR
    if np.any(ok):
        out[ok] = norm_cdf((best - mean[ok]) / std[ok])
    return out


def truncation_entropy_terms(gamma: np.ndarray) -> np.ndarray:
    """Entropy reduction from truncating a normal below at the gamma quantile.

    Computes gamma * pdf(gamma) / (2 * cdf(gamma)) - log cdf(gamma)
    elementwise, stable deep into the left tail (the hazard ratio is
    evaluated in log space). Mathematically nonnegative.
    """
    gamma = np.asarray(gamma, dtype=float)
    log_pdf = -0.5 * gamma * gamma - _LOG_SQRT_2PI
    log_cdf = norm_logcdf(gamma)
    hazard = np.exp(log_pdf - log_cdf)
    return 0.5 * gamma * hazard - log_cdf


def mes_score(mean, std, min_draws: np.ndarray) -> np.ndarray:
    """Mean truncation-entropy reduction over sampled minimum values.

    Zero wherever std is below the floor; clamped to be nonnegative
    against roundoff.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    draws = np.asarray(min_draws, dtype=float).reshape(-1)
    if draws.size == 0:
        raise EmptyInput("need at least one sampled minimum value")
    out = np.zeros(mean.shape)
    ok = std >= STD_FLOOR
    if np.any(ok):
        gamma = (mean[ok, None] - draws[None, :]) / std[ok, None]
        out[ok] = np.mean(truncation_entropy_terms(gamma), axis=1)
    np.maximum(out, 0.0, out=out)
    return out


def _scalar_or_batch(g: GpPosterior, x: np.ndarray, score) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mean, std = g.predict_batch(np.atleast_2d(x))
    out = score(mean, std)
    return float(out[0]) if single else out


def expected_improvement(g: GpPosterior, incumbent: Incumbent, x: np.ndarray) -> float | np.ndarray:
    """EI at ``x`` (a point or a batch of rows) under the posterior."""
    return _scalar_or_batch(g, x, lambda m, s: ei_score(m, s, incumbent.value))


def probability_of_improvement(g: GpPosterior, incumbent: Incumbent, x: np.ndarray) -> float | np.ndarray:
    """PI at ``x`` (a point or a batch of rows) under the posterior."""
    return _scalar_or_batch(g, x, lambda m, s: pi_score(m, s, incumbent.value))


def max_value_entropy_search(g: GpPosterior, min_draws: np.ndarray, x: np.ndarray) -> float | np.ndarray:
    """MES at ``x`` given sampled minimum values of the posterior."""
    return _scalar_or_batch(g, x, lambda m, s: mes_score(m, s, min_draws))


def sample_min_values_from(
    predict_batch,
    dim: int,
    anchors: np.ndarray,
    incumbent_value: float,
    settings: MesSettings,
    stream: RandomStream,
) -> np.ndarray:
    """Sample plausible minimum values of a posterior over the unit cube.

    The pointwise minimum's CDF under an independence approximation,
    F(y) = 1 - prod_i cdf((mean_i - y) / std_i), is evaluated over a
    fixed Halton grid of ``settings.grid_size`` points augmented with the
    ``anchors`` (typically the training inputs). A Gumbel minimum
    distribution is fitted by matching the quartiles located by
    bisection:

        b = (y75 - y25) / (g(0.75) - g(0.25)),  a = y50 - b * g(0.5)

    with g(q) = log(-log(1 - q)), and draws a + b * g(u) are taken with
    uniform u from the stream. Every draw is clamped from above by
    ``incumbent_value`` plus three times the largest posterior std. The
    grid and the quartile fit are deterministic given the posterior; the
    only stochastic element is the Gumbel inversion.
    """
    grid = qmc.Halton(d=dim, scramble=False).random(settings.grid_size)
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float)) if np.size(anchors) else np.empty((0, dim))
    points = np.vstack([grid, anchors]) if len(anchors) else grid
    mean, std = predict_batch(points)
    std = np.maximum(std, 1e-10)

    def survival_log(y: float) -> float:
        return float(np.sum(norm_logcdf((mean - y) / std)))

    lo = float(np.min(mean) - 8.0 * np.max(std))
    hi = float(np.min(mean) + 4.0 * np.max(std))
    quartiles = []
    for q in (0.25, 0.5, 0.75):
        target = math.log1p(-q)
        a, b = lo, hi
        for _ in range(80):
            mid = 0.5 * (a + b)
            # survival decreases in y; too-high survival means y is too low
            if survival_log(mid) > target:
                a = mid
            else:
                b = mid
        quartiles.append(0.5 * (a + b))
    y25, y50, y75 = quartiles

    def gq(q: float) -> float:
        return math.log(-math.log1p(-q))

    spread = y75 - y25
    scale = spread / (gq(0.75) - gq(0.25)) if spread > 1e-12 else 0.0
    loc = y50 - scale * gq(0.5)

    u = np.clip(stream.uniform(size=settings.num_min_samples), 1e-12, 1.0 - 1e-12)
    draws = loc + scale * np.log(-np.log1p(-u))
    bound = incumbent_value + 3.0 * float(np.max(std))
    return np.minimum(draws, bound)


def sample_min_values(g: GpPosterior, settings: MesSettings, stream: RandomStream) -> np.ndarray:
    """Min-value draws for a single-fidelity posterior."""
    if g.n == 0:
        raise EmptyInput("cannot sample minimum values from an empty posterior")
    return sample_min_values_from(
        g.predict_batch,
        g.dim,
        g.x_train,
        float(np.min(g.y_train)),
        settings,
        stream,
    )


def maximize_acquisition(
    evaluator,
    lower: np.ndarray,
    upper: np.ndarray,
    stream: RandomStream,
    candidates_per_dim: int = 1000,
    polish_starts: int = 5,
    polish_iterations: int = 100,
) -> tuple[np.ndarray, float]:
    """Maximize a batched acquisition ``evaluator(X) -> values`` over a box.

    Draws ``candidates_per_dim * d`` uniform candidates, then polishes
    the top ``polish_starts`` with a coordinate pattern search whose step
    shrinks geometrically from 0.1 to 1e-4 of the domain width over
    ``polish_iterations`` iterations. The returned value is never below
    the best raw candidate's.
    """
    from .search import pattern_search_geometric

    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.shape[0]
    m = candidates_per_dim * d
    cand = lower + (upper - lower) * stream.uniform(size=(m, d))
    vals = np.asarray(evaluator(cand), dtype=float)
    order = np.argsort(vals, kind="stable")
    top = cand[order[-polish_starts:]]
    x_best, v_best = pattern_search_geometric(
        evaluator, top, lower, upper, iterations=polish_iterations,
        step_start=0.1, step_end=1e-4,
    )
    raw_best = float(vals[order[-1]])
    if raw_best > v_best:
        return cand[order[-1]].copy(), raw_best
    return x_best, v_best
