"""Multifidelity acquisition functions and the per-level maximizer.

Each strategy scores a (point, level) pair: it starts from its
single-fidelity counterpart evaluated on the TOP-level posterior at the
point and discounts it by level-aware utility factors (posterior
correlation with the top level, observation-noise deflation, query cost,
local sample density). On the top level with unit cost each reduces
exactly to its single-fidelity counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acquisition import (
    Incumbent,
    MesSettings,
    ei_score,
    mes_score,
    pi_score,
    sample_min_values_from,
)
from .dataset import ObservationSet
from .errors import DimensionMismatch, EmptyInput, LevelOutOfRange
from .gp import NOISE_BOUNDS
from .mfgp import MfGpPosterior
from .numerics import RandomStream

# Fitted noise within one decade of its lower bound is treated as pinned
# at the floor: the noise deflation factor is then exactly 1.
NOISE_FLOOR_CEILING = NOISE_BOUNDS[0] * 10.0


@dataclass(frozen=True)
class CostSchedule:
    """Per-level query costs, cheapest first, top level normalized to 1."""

    costs: tuple[float, ...]

    def __post_init__(self) -> None:
        costs = tuple(float(c) for c in self.costs)
        if not costs:
            raise EmptyInput("cost schedule needs at least one level")
        if any(c <= 0 for c in costs):
            raise ValueError(f"costs must be positive, got {costs}")
        if any(a >= b for a, b in zip(costs, costs[1:])):
            raise ValueError(f"costs must be strictly increasing, got {costs}")
        if costs[-1] != 1.0:
            raise ValueError(f"top-level cost must be 1, got {costs[-1]}")
        object.__setattr__(self, "costs", costs)

    @property
    def level_count(self) -> int:
        return len(self.costs)

    def cost(self, level: int) -> float:
        if not 1 <= int(level) <= len(self.costs):
            raise LevelOutOfRange(f"level {level} outside 1..{len(self.costs)}")
        return self.costs[int(level) - 1]


@dataclass(frozen=True)
class MfRecommendation:
    """Chosen query: location, fidelity level, and acquisition score."""

    location: np.ndarray
    level: int
    score: float


def _noise_deflation(g: MfGpPosterior, std_level: np.ndarray) -> np.ndarray:
    """1 - noise_std / sqrt(std^2 + noise_std^2); exactly 1 at the noise floor."""
    if g.params.noise_variance <= NOISE_FLOOR_CEILING:
        return np.ones_like(std_level)
    noise_sd = g.noise_std
    return 1.0 - noise_sd / np.sqrt(std_level * std_level + noise_sd * noise_sd)


def mf_ei_score(
    g: MfGpPosterior, incumbent: Incumbent, costs: CostSchedule, x: np.ndarray, level: int
) -> np.ndarray:
    """Batched multifidelity EI at rows of ``x`` for one level.

    Top-level EI times: posterior correlation with the top level, the
    noise deflation factor, and the cost ratio (top cost over level
    cost). Clamped to be nonnegative (a negative fitted between-level
    correlation cannot make the score negative).
    """
    _, sd_l, mu_t, sd_t, corr = g.predict_with_reference(np.atleast_2d(x), level)
    ei = ei_score(mu_t, sd_t, incumbent.value)
    out = ei * corr * _noise_deflation(g, sd_l) / costs.cost(level)
    np.maximum(out, 0.0, out=out)
    return out


def mf_expected_improvement(
    g: MfGpPosterior, incumbent: Incumbent, costs: CostSchedule, x: np.ndarray, level: int
) -> float:
    """Multifidelity EI at a single point and level."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(mf_ei_score(g, incumbent, costs, x[None, :], level)[0])


def sample_density_discount(
    x: np.ndarray, sampled: np.ndarray, lengthscales: np.ndarray
) -> np.ndarray:
    """Product over sampled points of (1 - corr(x, x_i)), batched over rows.

    ``corr`` is a unit-amplitude squared exponential with the supplied
    lengthscales, so the factor vanishes at already-sampled points and
    approaches 1 far from all of them.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if sampled.size == 0:
        return np.ones(x.shape[0])
    sampled = np.atleast_2d(np.asarray(sampled, dtype=float))
    if sampled.shape[1] != x.shape[1]:
        raise DimensionMismatch(
            f"sampled points have dim {sampled.shape[1]}, query has dim {x.shape[1]}"
        )
    a = x / lengthscales
    b = sampled / lengthscales
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.prod(1.0 - np.exp(-0.5 * sq), axis=1)


def mf_pi_score(
    g: MfGpPosterior,
    incumbent: Incumbent,
    costs: CostSchedule,
    data: ObservationSet,
    x: np.ndarray,
    level: int,
) -> np.ndarray:
    """Batched multifidelity PI at rows of ``x`` for one level.

    Top-level PI times: posterior correlation with the top level, the
    cost ratio, and the sample-density discount over the points already
    evaluated at this level (level-1 lengthscales set the notion of
    "close"). Clamped to be nonnegative.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _, _, mu_t, sd_t, corr = g.predict_with_reference(x, level)
    pi = pi_score(mu_t, sd_t, incumbent.value)
    sampled = data.at_level(level).inputs
    density = sample_density_discount(x, sampled, g.params.kernels[0].lengthscales)
    out = pi * corr * density / costs.cost(level)
    np.maximum(out, 0.0, out=out)
    return out


def mf_probability_of_improvement(
    g: MfGpPosterior,
    incumbent: Incumbent,
    costs: CostSchedule,
    data: ObservationSet,
    x: np.ndarray,
    level: int,
) -> float:
    """Multifidelity PI at a single point and level."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(mf_pi_score(g, incumbent, costs, data, x[None, :], level)[0])


def mf_mes_score(
    g: MfGpPosterior,
    min_draws: np.ndarray,
    costs: CostSchedule,
    x: np.ndarray,
    level: int,
) -> np.ndarray:
    """Batched multifidelity MES at rows of ``x`` for one level.

    The squared posterior correlation scales the top-level MES value
    (information about the top-level minimum decays with the square of
    the correlation), divided by the level cost. Reduces to plain MES on
    the top level and vanishes where the correlation is zero.
    """
    _, _, mu_t, sd_t, corr = g.predict_with_reference(np.atleast_2d(x), level)
    mes = mes_score(mu_t, sd_t, min_draws)
    return (corr * corr) * mes / costs.cost(level)


def mf_max_value_entropy_search(
    g: MfGpPosterior,
    min_draws: np.ndarray,
    costs: CostSchedule,
    x: np.ndarray,
    level: int,
) -> float:
    """Multifidelity MES at a single point and level."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(mf_mes_score(g, min_draws, costs, x[None, :], level)[0])


def sample_reference_min_values(
    g: MfGpPosterior, settings: MesSettings, stream: RandomStream
) -> np.ndarray:
    """Min-value draws of the TOP-level marginal posterior.

    The clamp anchor is the best observed top-level value (falling back
    to the best value overall if the top level has no observations yet).
    """
    top_mask = g.levels_train == g.level_count
    if np.any(top_mask):
        anchor = float(np.min(g.y_train[top_mask]))
    elif g.n:
        anchor = float(np.min(g.y_train))
    else:
        raise EmptyInput("cannot sample minimum values from an empty posterior")
    return sample_min_values_from(
        lambda pts: g.predict_level_batch(pts, g.level_count),
        g.dim,
        g.x_train,
        anchor,
        settings,
        stream,
    )


def maximize_mf_acquisition(
    evaluator,
    lower: np.ndarray,
    upper: np.ndarray,
    levels: tuple[int, ...],
    stream: RandomStream,
    candidates_per_dim: int = 1000,
    polish_starts: int = 5,
    polish_iterations: int = 100,
) -> MfRecommendation:
    """Maximize ``evaluator(X, level) -> values`` over a box and level set.

    A single shared candidate set is scored at every level (ascending)
    and polished per level with the same pattern search as the
    single-fidelity maximizer; on exactly tied scores the higher level
    wins.
    """
    from .search import pattern_search_geometric

    if not levels:
        raise EmptyInput("need at least one candidate level")
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.shape[0]
    m = candidates_per_dim * d
    cand = lower + (upper - lower) * stream.uniform(size=(m, d))

    best: MfRecommendation | None = None
    for level in sorted(int(l) for l in levels):
        vals = np.asarray(evaluator(cand, level), dtype=float)
        order = np.argsort(vals, kind="stable")
        top = cand[order[-polish_starts:]]
        x_l, v_l = pattern_search_geometric(
            lambda pts, _l=level: evaluator(pts, _l),
            top, lower, upper,
            iterations=polish_iterations, step_start=0.1, step_end=1e-4,
        )
        raw_best = float(vals[order[-1]])
        if raw_best > v_l:
            x_l, v_l = cand[order[-1]].copy(), raw_best
        if best is None or v_l >= best.score:
            best = MfRecommendation(location=x_l, level=level, score=float(v_l))
    return best
