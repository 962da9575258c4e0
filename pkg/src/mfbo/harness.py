"""Experiment orchestration: trials to artifacts, suites, registry checks.

A suite is a list of experiment configurations sharing an output
directory. Trials are independent given their index, so suites can fan
(config, trial) pairs out to worker processes; artifacts are identical
whatever the schedule because every trial owns a stream derived only
from the base seed and its index.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from ._version import __version__
from .benchmarks import FidelityFamily, registry
from .engine import (
    ExperimentConfig,
    ResolvedExperiment,
    TrialTrace,
    config_from_manifest,
    run_trial,
)
from .errors import ConfigError, EmptyInput
from .metrics import AggregateCurve, aggregate, emit

_CONFIG_KEYS = {
    "benchmark", "acquisition", "levels", "costs", "budget", "n_initial",
    "trials", "seed", "mes_samples", "mes_grid", "charge_initial_design",
    "label",
}


@dataclass(frozen=True)
class SuiteSpec:
    """A batch of experiments to run into one output directory."""

    configs: tuple[ExperimentConfig, ...]
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        for cfg in self.configs:
            pair = (cfg.benchmark, cfg.acquisition.strip().lower())
            if pair in seen:
                raise ConfigError(
                    f"duplicate benchmark/acquisition pair {pair} in suite"
                )
            seen.add(pair)
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")


@dataclass(frozen=True)
class ExperimentResult:
    resolved: ResolvedExperiment
    traces: tuple[TrialTrace, ...]
    curve: AggregateCurve
    paths: tuple[Path, ...]

    @property
    def final_median(self) -> float:
        return float(self.curve.median[-1])


@dataclass(frozen=True)
class VerifyResult:
    name: str
    passed: bool
    detail: str


def _trial_job(args: tuple[dict, int]) -> TrialTrace:
    entry, index = args
    resolved = config_from_manifest(entry).resolve()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return run_trial(resolved, index)
    with threadpool_limits(limits=1):
        return run_trial(resolved, index)


def _run_traces(
    resolved_list: Sequence[ResolvedExperiment], workers: int
) -> list[tuple[TrialTrace, ...]]:
    """Run every (config, trial) pair, possibly across processes."""
    jobs: list[tuple[dict, int]] = []
    spans: list[tuple[int, int]] = []
    for resolved in resolved_list:
        start = len(jobs)
        entry = resolved.manifest_dict()
        jobs.extend((entry, k) for k in range(resolved.trials))
        spans.append((start, len(jobs)))
    if workers <= 1 or len(jobs) <= 1:
        traces = [_trial_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_trial_job, jobs))
    return [tuple(traces[a:b]) for a, b in spans]


def build_manifest(resolved: ResolvedExperiment) -> dict:
    return {
        "package": "mfbo",
        "version": __version__,
        "configuration": resolved.manifest_dict(),
        "trial_indices": list(range(resolved.trials)),
    }


def run_experiment(
    config: ExperimentConfig | ResolvedExperiment,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> ExperimentResult:
    """Run all trials of one configuration and optionally write artifacts."""
    resolved = config.resolve() if isinstance(config, ExperimentConfig) else config
    (traces,) = _run_traces([resolved], workers)
    curve = aggregate(traces)
    paths: tuple[Path, ...] = ()
    if out_dir is not None:
        paths = tuple(
            emit(curve, traces, out_dir, resolved.label, build_manifest(resolved))
        )
    return ExperimentResult(resolved=resolved, traces=traces, curve=curve, paths=paths)


def run_suite(spec: SuiteSpec) -> list[ExperimentResult]:
    """Run every experiment of a suite, sharing one worker pool."""
    if not spec.configs:
        raise EmptyInput("suite holds no experiments")
    resolved_list = [cfg.resolve() for cfg in spec.configs]
    grouped = _run_traces(resolved_list, spec.workers)
    results: list[ExperimentResult] = []
    for resolved, traces in zip(resolved_list, grouped):
        curve = aggregate(traces)
        paths: tuple[Path, ...] = ()
        if spec.out_dir is not None:
            paths = tuple(
                emit(curve, traces, spec.out_dir, resolved.label, build_manifest(resolved))
            )
        results.append(
            ExperimentResult(resolved=resolved, traces=traces, curve=curve, paths=paths)
        )
    return results


def _experiment_from_entry(entry: dict, defaults: dict, where: str) -> ExperimentConfig:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(entry).__name__}")
    merged = {**defaults, **entry}
    unknown = sorted(set(merged) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    for key in ("benchmark", "acquisition"):
        if key not in merged:
            raise ConfigError(f"{where}: missing required key {key!r}")
    try:
        return ExperimentConfig(
            benchmark=str(merged["benchmark"]),
            acquisition=str(merged["acquisition"]),
            levels=tuple(int(l) for l in merged["levels"]) if merged.get("levels") is not None else None,
            costs=tuple(float(c) for c in merged["costs"]) if merged.get("costs") is not None else None,
            budget=float(merged["budget"]) if merged.get("budget") is not None else None,
            n_initial={int(k): int(v) for k, v in merged["n_initial"].items()}
            if merged.get("n_initial") is not None else None,
            trials=int(merged.get("trials", 10)),
            seed=int(merged.get("seed", 0)),
            mes_samples=int(merged.get("mes_samples", 10)),
            mes_grid=int(merged["mes_grid"]) if merged.get("mes_grid") is not None else None,
            charge_initial_design=bool(merged.get("charge_initial_design", False)),
            label=str(merged["label"]) if merged.get("label") is not None else None,
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def suite_from_entries(
    entries: Sequence[dict],
    defaults: dict | None = None,
    out_dir: str | None = None,
    workers: int = 1,
    where: str = "suite",
) -> SuiteSpec:
    """Build a validated suite from raw mapping entries."""
    if not entries:
        raise ConfigError(f"{where}: 'experiments' must be a non-empty list")
    configs = tuple(
        _experiment_from_entry(entry, defaults or {}, f"{where} experiments[{i}]")
        for i, entry in enumerate(entries)
    )
    return SuiteSpec(configs=configs, out_dir=out_dir, workers=workers)


def parse_suite_config(path: str | Path) -> SuiteSpec:
    """Load a suite description from a YAML file.

    Layout: an ``experiments`` list of per-experiment mappings, an
    optional ``defaults`` mapping merged under each experiment, and
    optional ``output`` and ``workers`` keys.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = sorted(set(doc) - {"experiments", "defaults", "output", "workers"})
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {unknown}")
    entries = doc.get("experiments")
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: 'experiments' must be a list")
    defaults = doc.get("defaults") or {}
    if not isinstance(defaults, dict):
        raise ConfigError(f"{path}: 'defaults' must be a mapping")
    return suite_from_entries(
        entries,
        defaults,
        out_dir=doc.get("output"),
        workers=int(doc.get("workers", 1)),
        where=str(path),
    )


def _grid_oracle(family: FidelityFamily, points) -> tuple[np.ndarray, float]:
    """Dense-grid argmin of the reference level (meshgrid per dimension)."""
    axes = [
        np.linspace(family.lower[i], family.upper[i], points[i])
        for i in range(family.dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    values = family.evaluate_batch(family.level_count, flat, None)
    i = int(np.argmin(values))
    return flat[i], float(values[i])


_GRID_ORACLE_POINTS = {
    "jump_forrester": (1_000_001,),
    "alos_d2": (1000, 1000),
    "alos_d3": (100, 100, 100),
}


def verify_registry(value_tol: float = 1e-3) -> list[VerifyResult]:
    """Re-derive every optimum record and report agreement.

    Every family's recorded optimum value is checked against a noise
    free evaluation at the recorded location. Families with a dense
    grid oracle are additionally minimized over the grid, and the
    discrepancy between grid minimum and record is reported verbatim
    rather than folded into the pass flag (the records themselves carry
    rounded published values).
    """
    results: list[VerifyResult] = []
    for name, family in registry().items():
        value_at_record = family.true_value(family.optimum.location)
        gap = abs(value_at_record - family.optimum.value)
        passed = gap <= value_tol
        detail = (
            f"f(recorded x*) = {value_at_record:.6f}, recorded f* = "
            f"{family.optimum.value:.6f}, |gap| = {gap:.2e}"
        )
        if name in _GRID_ORACLE_POINTS:
            loc, val = _grid_oracle(family, _GRID_ORACLE_POINTS[name])
            passed = passed and abs(val - family.optimum.value) <= value_tol
            detail += (
                f"; grid oracle min {val:.6f} at {np.round(loc, 6).tolist()}"
                f" (record offset {abs(val - family.optimum.value):.2e}, "
                f"location offset {float(np.linalg.norm(loc - family.optimum.location)):.2e})"
            )
        results.append(VerifyResult(name=name, passed=passed, detail=detail))
    return results


def budget_to_tolerance(curve: AggregateCurve, tol: float = 0.05) -> float | None:
    """Smallest grid budget where the median error dips to ``tol``."""
    hits = np.nonzero(curve.median <= tol)[0]
    if hits.size == 0:
        return None
    return float(curve.budget[hits[0]])


def summary_table(results: Sequence[ExperimentResult]) -> str:
    """Aligned text table of final median errors, ranked per benchmark.

    The two lowest final medians within each benchmark are marked with
    ``*`` and ``+`` so cross-acquisition comparisons stand out.
    """
    if not results:
        raise EmptyInput("no results to summarize")
    by_benchmark: dict[str, list[float]] = {}
    for res in results:
        by_benchmark.setdefault(res.resolved.family.name, []).append(res.final_median)
    marks: dict[int, str] = {}
    for res_index, res in enumerate(results):
        ordered = sorted(by_benchmark[res.resolved.family.name])
        value = res.final_median
        if value == ordered[0]:
            marks[res_index] = "*"
        elif len(ordered) > 1 and value == ordered[1]:
            marks[res_index] = "+"
        else:
            marks[res_index] = " "
    headers = ["label", "benchmark", "acquisition", "levels", "final median eps_t", ""]
    rows = [
        [
            res.resolved.label,
            res.resolved.family.name,
            res.resolved.kind,
            ",".join(str(l) for l in res.resolved.family_levels),
            f"{res.final_median:.4f}",
            marks[i],
        ]
        for i, res in enumerate(results)
    ]
    widths = [max(len(h), *(len(r[c]) for r in rows)) for c, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[c]) for c, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[c] for c in range(len(headers))).rstrip(),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip())
    return "\n".join(lines)
