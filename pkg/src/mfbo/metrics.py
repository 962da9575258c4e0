"""Convergence metrics, cross-trial aggregation, and result files.

The three error figures live on a common dimensionless scale: a
normalized distance to the optimizer, a normalized objective gap, and
their root mean square. Traces from repeated trials are aligned onto a
shared budget grid by carrying the last observation forward, since
multifidelity runs spend their budget at uneven rates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .benchmarks import FidelityFamily
from .errors import EmptyInput, IoFailure


@dataclass(frozen=True)
class MetricPoint:
    """Errors of one incumbent, tagged with the budget spent to reach it."""

    budget: float
    eps_x: float
    eps_f: float
    eps_t: float


@dataclass(frozen=True)
class AggregateCurve:
    """Pointwise median and quartiles of the total error across trials."""

    budget: np.ndarray
    median: np.ndarray
    p25: np.ndarray
    p75: np.ndarray


def compute_metrics(
    family: FidelityFamily, location: np.ndarray, budget: float = 0.0
) -> MetricPoint:
    """Score an incumbent location against the family's recorded optimum.

    The location error is the Euclidean distance to the optimizer in
    box-normalized coordinates divided by sqrt(D), so a miss across the
    full diagonal scores 1 regardless of dimension. The objective error
    normalizes the noise-free gap by the objective range and is clamped
    at zero from below: a few optimum records are published to four
    decimals and a well-converged run can undercut them by a sliver.
    The total error is the root mean square of the two.
    """
    location = np.asarray(location, dtype=float).reshape(-1)
    width = family.upper - family.lower
    u_hat = (location - family.lower) / width
    u_star = (family.optimum.location - family.lower) / width
    eps_x = float(np.linalg.norm(u_hat - u_star)) / math.sqrt(family.dim)
    gap = family.true_value(location) - family.optimum.value
    eps_f = max(gap / (family.f_max - family.optimum.value), 0.0)
    eps_t = math.sqrt((eps_x * eps_x + eps_f * eps_f) / 2.0)
    return MetricPoint(budget=float(budget), eps_x=eps_x, eps_f=eps_f, eps_t=eps_t)


def aggregate(traces: Sequence, grid_size: int = 201) -> AggregateCurve:
    """Median and quartile curves of the total error over a budget grid.

    Each trace becomes a right-continuous step function of spent budget
    (last observation carried forward; grid points before the first
    record take the first record's value), sampled on a uniform grid
    from zero to the largest trace budget cap. Percentiles interpolate
    linearly between order statistics.
    """
    traces = list(traces)
    if not traces:
        raise EmptyInput("need at least one trial trace to aggregate")
    b_max = max(float(t.b_max) for t in traces)
    grid = np.linspace(0.0, b_max, grid_size)
    rows = np.empty((len(traces), grid_size))
    for k, trace in enumerate(traces):
        budgets = np.array([r.budget for r in trace.records])
        eps = np.array([r.eps_t for r in trace.records])
        idx = np.searchsorted(budgets, grid, side="right") - 1
        np.maximum(idx, 0, out=idx)
        rows[k] = eps[idx]
    return AggregateCurve(
        budget=grid,
        median=np.percentile(rows, 50.0, axis=0),
        p25=np.percentile(rows, 25.0, axis=0),
        p75=np.percentile(rows, 75.0, axis=0),
    )


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest string that parses back to
    # the same double, which keeps replay comparisons byte-exact
    return repr(float(value))


def trial_csv_header(dim: int) -> list[str]:
    coords = [f"x{i}" for i in range(dim)]
    return ["iteration", "budget", "level", *coords, "y", "incumbent",
            "eps_x", "eps_f", "eps_t"]


def write_trial_csv(path: Path, dim: int, records: Iterable) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(trial_csv_header(dim))
            for r in records:
                writer.writerow([
                    str(int(r.iteration)),
                    _fmt(r.budget),
                    str(int(r.level)),
                    *(_fmt(v) for v in np.asarray(r.location, dtype=float)),
                    _fmt(r.observed),
                    _fmt(r.incumbent),
                    _fmt(r.eps_x),
                    _fmt(r.eps_f),
                    _fmt(r.eps_t),
                ])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def emit(
    curve: AggregateCurve,
    traces: Sequence,
    out_dir: str | Path,
    label: str,
    manifest: dict,
) -> list[Path]:
    """Write all artifacts of one (benchmark, acquisition) run.

    Produces one CSV per trial, an aggregate CSV, a whitespace
    separated plot series, and a JSON manifest carrying the fully
    resolved configuration so the run can be replayed. Returns the
    paths written, trials first.
    """
    traces = list(traces)
    if not traces:
        raise EmptyInput("refusing to emit artifacts for zero traces")
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for trace in traces:
            path = out_dir / f"{label}-trial{int(trace.trial_index):02d}.csv"
            dim = len(trace.records[0].location)
            write_trial_csv(path, dim, trace.records)
            written.append(path)

        agg_path = out_dir / f"{label}-aggregate.csv"
        with agg_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["budget", "median", "p25", "p75"])
            for b, m, lo, hi in zip(curve.budget, curve.median, curve.p25, curve.p75):
                writer.writerow([_fmt(b), _fmt(m), _fmt(lo), _fmt(hi)])
        written.append(agg_path)

        dat_path = out_dir / f"{label}.dat"
        with dat_path.open("w") as fh:
            fh.write("# budget median p25 p75\n")
            for b, m, lo, hi in zip(curve.budget, curve.median, curve.p25, curve.p75):
                fh.write(f"{_fmt(b)} {_fmt(m)} {_fmt(lo)} {_fmt(hi)}\n")
        written.append(dat_path)

        man_path = out_dir / f"{label}-manifest.json"
        with man_path.open("w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(man_path)
    except OSError as exc:
        raise IoFailure(f"cannot write into {out_dir}: {exc}") from exc
    return written


def read_aggregate(path: str | Path) -> AggregateCurve:
    """Parse an aggregate CSV back into a curve."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["budget", "median", "p25", "p75"]:
                raise IoFailure(f"{path} is not an aggregate CSV (header {header})")
            cols = [[], [], [], []]
            for row in reader:
                for c, cell in zip(cols, row):
                    c.append(float(cell))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not cols[0]:
        raise EmptyInput(f"{path} holds no data rows")
    return AggregateCurve(
        budget=np.array(cols[0]),
        median=np.array(cols[1]),
        p25=np.array(cols[2]),
        p75=np.array(cols[3]),
    )


def read_manifest(path: str | Path) -> dict:
    """Load a run manifest written by :func:`emit`."""
    try:
        with Path(path).open() as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path} is not valid JSON: {exc}") from exc
