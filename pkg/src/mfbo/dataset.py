"""Observation storage shared by the surrogates and the optimization loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


@dataclass
class ObservationSet:
    """Columnar store of evaluated points with fidelity labels.

    ``inputs`` is (n, dim); ``levels`` holds integer fidelity labels
    (1-based, 1 = cheapest); ``values`` the observed objective values.
    ``total_cost`` accumulates the evaluation cost of everything appended.
    """

    dim: int
    inputs: np.ndarray = field(default=None)  # type: ignore[assignment]
    levels: np.ndarray = field(default=None)  # type: ignore[assignment]
    values: np.ndarray = field(default=None)  # type: ignore[assignment]
    total_cost: float = 0.0

    def __post_init__(self) -> None:
        if self.inputs is None:
            self.inputs = np.empty((0, self.dim))
        if self.levels is None:
            self.levels = np.empty((0,), dtype=int)
        if self.values is None:
            self.values = np.empty((0,))
        self.inputs = np.asarray(self.inputs, dtype=float).reshape(-1, self.dim)
        self.levels = np.asarray(self.levels, dtype=int).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if not (len(self.inputs) == len(self.levels) == len(self.values)):
            raise DimensionMismatch(
                f"inputs/levels/values lengths disagree: "
                f"{len(self.inputs)}/{len(self.levels)}/{len(self.values)}"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def append(self, x: np.ndarray, level: int, value: float, cost: float = 0.0) -> None:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"point has dim {x.shape[0]}, set has dim {self.dim}")
        self.inputs = np.vstack([self.inputs, x[None, :]])
        self.levels = np.append(self.levels, int(level))
        self.values = np.append(self.values, float(value))
        self.total_cost += float(cost)

    def at_level(self, level: int) -> ObservationSet:
        """View restricted to one fidelity (copies the row subset)."""
        mask = self.levels == int(level)
        return ObservationSet(
            dim=self.dim,
            inputs=self.inputs[mask],
            levels=self.levels[mask],
            values=self.values[mask],
            total_cost=self.total_cost,
        )

    def level_set(self) -> tuple[int, ...]:
        return tuple(sorted(set(int(l) for l in self.levels)))
