"""Derivative-free box-constrained maximization helpers.

Two flavors of coordinate pattern search over a batch objective
``f(X: (m, d)) -> (m,)``:

* a geometric-schedule search used for acquisition polishing (fixed
  iteration count, step shrinking on a fixed geometric schedule), and
* an adaptive-shrink search used for hyperparameter polishing (step
  halves when a poll fails to improve).

Both are fully deterministic given their inputs and evaluate whole polls
in single batched objective calls.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], np.ndarray]


def pattern_search_geometric(
    f: Objective,
    starts: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    iterations: int = 100,
    step_start: float = 0.1,
    step_end: float = 1e-4,
) -> tuple[np.ndarray, float]:
    """Lockstep coordinate search from several starts, geometric step decay.

    The step size is a fraction of the per-dimension box width, shrinking
    geometrically from ``step_start`` to ``step_end`` over ``iterations``
    iterations. Each iteration polls every coordinate in both directions
    for every active start and moves a start only when the best poll
    point improves on it.

    Returns:
        ``(x_best, f_best)`` over all starts after polishing.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    k, d = starts.shape
    width = upper - lower

    points = np.clip(starts, lower, upper).copy()
    values = np.asarray(f(points), dtype=float).copy()

    if iterations > 1:
        decay = (step_end / step_start) ** (1.0 / (iterations - 1))
    else:
        decay = 1.0
    offsets = np.concatenate([np.eye(d), -np.eye(d)], axis=0)  # (2d, d)
    frac = step_start
    for _ in range(iterations):
        cand = points[:, None, :] + frac * width[None, None, :] * offsets[None, :, :]
        cand = np.clip(cand, lower, upper)
        vals = np.asarray(f(cand.reshape(k * 2 * d, d)), dtype=float).reshape(k, 2 * d)
        best_idx = np.argmax(vals, axis=1)
        best_vals = vals[np.arange(k), best_idx]
        improved = best_vals > values
        points[improved] = cand[improved, best_idx[improved]]
        values[improved] = best_vals[improved]
        frac *= decay

    winner = int(np.argmax(values))
    return points[winner].copy(), float(values[winner])


def pattern_search_adaptive(
    f: Objective,
    start: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iterations: int = 60,
    step_start: float = 0.15,
    step_min: float = 1e-4,
) -> tuple[np.ndarray, float]:
    """Single-start coordinate search; the step halves when a poll fails.

    Stops when the step falls below ``step_min`` (as a fraction of the box
    width) or after ``max_iterations`` polls.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(start, dtype=float), lower, upper).copy()
    d = x.shape[0]
    width = upper - lower
    fx = float(np.asarray(f(x[None, :]))[0])

    frac = step_start
    offsets = np.concatenate([np.eye(d), -np.eye(d)], axis=0)
    for _ in range(max_iterations):
        cand = np.clip(x[None, :] + frac * width[None, :] * offsets, lower, upper)
        vals = np.asarray(f(cand), dtype=float)
        j = int(np.argmax(vals))
        if vals[j] > fx:
            x = cand[j].copy()
            fx = float(vals[j])
        else:
            frac *= 0.5
            if frac < step_min:
                break
    return x, fx
