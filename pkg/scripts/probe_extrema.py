"""Regenerate the frozen extrema constants in the benchmark registry.

For every family this probes the noise-free reference level with a
seeded 1e6-point Latin hypercube, polishes the best minimum candidate
with an adaptive pattern search, and prints the resulting optimum
location/value and domain maximum (f_max) ready to paste into the
registry. Also runs dense-grid cross-checks for the discontinuous
Forrester argmin and the ALOS minima.

Usage: python scripts/probe_extrema.py
"""

from __future__ import annotations

import sys

import numpy as np

sys.path.insert(0, "src")

from mfbo.benchmarks import registry  # noqa: E402
from mfbo.numerics import RandomStream, latin_hypercube  # noqa: E402
from mfbo.search import pattern_search_adaptive  # noqa: E402

PROBE_SEED = 20250822
PROBE_POINTS = 1_000_000


def probe_family(name: str, family) -> None:
    stream = RandomStream(PROBE_SEED)
    top = family.level_count
    lo, hi = family.lower, family.upper
    dim = family.dim

    def evaluate(points: np.ndarray) -> np.ndarray:
        out = np.empty(points.shape[0])
        chunk = 100_000
        for start in range(0, points.shape[0], chunk):
            sl = slice(start, min(start + chunk, points.shape[0]))
            out[sl] = family._evaluator(top, points[sl], None)
        return out

    pts = lo + (hi - lo) * latin_hypercube(PROBE_POINTS, dim, stream)
    vals = evaluate(pts)
    i_min = int(np.argmin(vals))
    i_max = int(np.argmax(vals))

    neg = lambda X: -evaluate(np.atleast_2d(X))  # noqa: E731
    x_min, v_min_neg = pattern_search_adaptive(
        neg, pts[i_min], lo, hi, max_iterations=400, step_start=0.02, step_min=1e-12
    )
    pos = lambda X: evaluate(np.atleast_2d(X))  # noqa: E731
    x_max, v_max = pattern_search_adaptive(
        pos, pts[i_max], lo, hi, max_iterations=400, step_start=0.02, step_min=1e-12
    )
    print(f"{name}:")
    print(f"  grid min {vals[i_min]!r} at {pts[i_min]!r}")
    print(f"  polished min {-v_min_neg!r} at {np.array2string(x_min, separator=', ', precision=17)}")
    print(f"  grid max {vals[i_max]!r}; polished max {v_max!r} at {np.array2string(x_max, separator=', ', precision=17)}")


def jump_grid_oracle() -> None:
    family = registry()["jump_forrester"]
    grid = np.linspace(0.0, 1.0, 1_000_001)[:, None]
    vals = family._evaluator(2, grid, None)
    i = int(np.argmin(vals))
    print(f"jump_forrester dense-grid argmin: x={grid[i, 0]!r}, f={vals[i]!r}")


def alos_grid_oracle() -> None:
    for name, mesh in (("alos_d2", 1000), ("alos_d3", 100)):
        family = registry()[name]
        axes = [np.linspace(0.0, 1.0, mesh)] * family.dim
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, family.dim)
        vals = family._evaluator(2, pts, None)
        i = int(np.argmin(vals))
        print(f"{name} meshgrid ({mesh}^{family.dim}) argmin: x={pts[i]!r}, f={vals[i]!r}")


def main() -> None:
    for name, family in registry().items():
        probe_family(name, family)
    jump_grid_oracle()
    alos_grid_oracle()


if __name__ == "__main__":
    main()
