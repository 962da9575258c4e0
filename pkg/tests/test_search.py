"""Pattern-search maximizers: convergence, bounds, batching, determinism."""

import numpy as np
import pytest

from mfbo.search import pattern_search_adaptive, pattern_search_geometric


def neg_quadratic(center):
    center = np.asarray(center, dtype=float)

    def f(pts):
        pts = np.atleast_2d(pts)
        return -np.sum((pts - center[None, :]) ** 2, axis=1)

    return f


class TestGeometric:
    def test_finds_interior_quadratic_maximum(self):
        f = neg_quadratic([0.3, 0.7])
        starts = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
        x, v = pattern_search_geometric(
            f, starts, np.zeros(2), np.ones(2), iterations=200
        )
        assert np.all(np.abs(x - np.array([0.3, 0.7])) < 1e-3)
        assert v > -1e-6

    def test_boundary_maximum_is_clipped_not_overshot(self):
        # maximum of x0 + x1 on the unit box sits at the corner (1, 1)
        def f(pts):
            pts = np.atleast_2d(pts)
            return pts.sum(axis=1)

        x, v = pattern_search_geometric(
            f, np.array([[0.2, 0.9]]), np.zeros(2), np.ones(2), iterations=150
        )
        assert np.all(x <= 1.0 + 1e-15)
        assert np.all(x >= 0.0)
        assert abs(v - 2.0) < 1e-2

    def test_respects_nonunit_box(self):
        f = neg_quadratic([3.0, -1.0])
        lower = np.array([2.0, -4.0])
        upper = np.array([5.0, 0.0])
        x, _ = pattern_search_geometric(
            f, np.array([[2.0, -4.0]]), lower, upper, iterations=200
        )
        assert np.all(x >= lower) and np.all(x <= upper)
        assert np.all(np.abs(x - np.array([3.0, -1.0])) < 1e-2)

    def test_result_never_below_best_start(self):
        f = neg_quadratic([0.5])
        starts = np.array([[0.1], [0.52], [0.9]])
        _, v = pattern_search_geometric(f, starts, np.zeros(1), np.ones(1))
        assert v >= float(np.max(f(starts)))

    def test_objective_sees_batched_polls(self):
        # each iteration must evaluate one (k*2d, d) batch, not point-by-point
        shapes = []

        def f(pts):
            pts = np.atleast_2d(pts)
            shapes.append(pts.shape)
            return -np.sum(pts**2, axis=1)

        pattern_search_geometric(
            f, np.array([[0.4, 0.4], [0.6, 0.6]]), np.zeros(2), np.ones(2), iterations=3
        )
        # one initial (2, 2) call, then three (8, 2) poll batches
        assert shapes[0] == (2, 2)
        assert shapes[1:] == [(8, 2)] * 3

    def test_deterministic(self):
        f = neg_quadratic([0.25, 0.75])
        starts = np.array([[0.9, 0.1]])
        a = pattern_search_geometric(f, starts, np.zeros(2), np.ones(2))
        b = pattern_search_geometric(f, starts, np.zeros(2), np.ones(2))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_single_iteration_runs(self):
        f = neg_quadratic([0.5])
        x, v = pattern_search_geometric(
            f, np.array([[0.2]]), np.zeros(1), np.ones(1), iterations=1
        )
        assert x.shape == (1,) and np.isfinite(v)


class TestAdaptive:
    def test_finds_interior_maximum(self):
        f = neg_quadratic([1.5, 2.5])
        x, v = pattern_search_adaptive(
            f, np.array([0.0, 0.0]), np.zeros(2), np.full(2, 4.0), max_iterations=200
        )
        assert np.all(np.abs(x - np.array([1.5, 2.5])) < 1e-2)
        assert v > -1e-3

    def test_stays_inside_box(self):
        def f(pts):
            pts = np.atleast_2d(pts)
            return pts[:, 0]

        x, _ = pattern_search_adaptive(
            f, np.array([0.5]), np.zeros(1), np.ones(1), max_iterations=100
        )
        assert 0.0 <= x[0] <= 1.0
        assert x[0] > 0.99

    def test_step_shrinks_to_exit_early(self):
        # from the exact optimum every poll fails, so the loop exits on
        # step_min long before max_iterations
        calls = []

        def f(pts):
            pts = np.atleast_2d(pts)
            calls.append(len(pts))
            return -np.sum((pts - 0.5) ** 2, axis=1)

        pattern_search_adaptive(
            f, np.array([0.5]), np.zeros(1), np.ones(1), max_iterations=10_000
        )
        # 1 initial call + ceil(log2(0.15 / 1e-4)) + 1 = 12 failing polls
        assert len(calls) < 20

    def test_deterministic(self):
        f = neg_quadratic([0.3])
        a = pattern_search_adaptive(f, np.array([0.8]), np.zeros(1), np.ones(1))
        b = pattern_search_adaptive(f, np.array([0.8]), np.zeros(1), np.ones(1))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_start_outside_box_is_clipped(self):
        f = neg_quadratic([0.5])
        x, _ = pattern_search_adaptive(f, np.array([3.0]), np.zeros(1), np.ones(1))
        assert 0.0 <= x[0] <= 1.0
