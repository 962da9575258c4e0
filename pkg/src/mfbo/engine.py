"""The sequential optimization loop and its configuration.

A trial owns a seeded random stream, an observation set in box
normalized coordinates, and a surrogate that is refit on a cadence and
extended by rank-one updates in between. Each step restricts the choice
to levels still affordable under the remaining budget, maximizes the
configured acquisition, queries the benchmark, and records the
incumbent together with its error metrics.

All surrogate and acquisition work happens on the unit cube; locations
are mapped to the family's box only to evaluate the benchmark and to
report records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .acquisition import (
    Incumbent,
    MesSettings,
    ei_score,
    maximize_acquisition,
    mes_score,
    pi_score,
    sample_min_values,
)
from .acquisition_mf import (
    CostSchedule,
    maximize_mf_acquisition,
    mf_ei_score,
    mf_mes_score,
    mf_pi_score,
    sample_reference_min_values,
)
from .benchmarks import FidelityFamily, lookup
from .dataset import ObservationSet
from .errors import BudgetExhausted, ConfigError, EmptyInput, UnknownAcquisition
from .gp import GpPosterior, fit_gp
from .metrics import compute_metrics
from .mfgp import MfGpPosterior, fit_mf_gp
from .numerics import RandomStream, latin_hypercube

SINGLE_FIDELITY_KINDS = ("ei", "pi", "mes")
MULTI_FIDELITY_KINDS = ("mfei", "mfpi", "mfmes")
ACQUISITION_KINDS = SINGLE_FIDELITY_KINDS + MULTI_FIDELITY_KINDS

# Stream derivation tags; replays depend on these staying put.
_INIT, _FIT, _ACQ, _MES, _NOISE = range(5)

_BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark/acquisition run request, before defaults are filled.

    ``levels`` names fidelities of the family (ascending); single
    fidelity strategies take exactly the reference level and default to
    it. ``costs`` overrides the family's schedule for the chosen subset.
    ``n_initial`` maps family levels to initial design sizes. A budget
    of None resolves to 100 per input dimension, an MES grid of None to
    100 grid points per dimension.
    """

    benchmark: str
    acquisition: str
    levels: tuple[int, ...] | None = None
    costs: tuple[float, ...] | None = None
    budget: float | None = None
    n_initial: Mapping[int, int] | None = None
    trials: int = 10
    seed: int = 0
    mes_samples: int = 10
    mes_grid: int | None = None
    charge_initial_design: bool = False
    label: str | None = None

    def resolve(self) -> "ResolvedExperiment":
        """Validate and fill every default; raises on bad combinations."""
        kind = self.acquisition.strip().lower()
        if kind not in ACQUISITION_KINDS:
            raise UnknownAcquisition(
                f"unknown acquisition {self.acquisition!r}; "
                f"choose one of {', '.join(ACQUISITION_KINDS)}"
            )
        family = lookup(self.benchmark)
        top = family.level_count

        if self.levels is None:
            fam_levels = (top,) if kind in SINGLE_FIDELITY_KINDS else tuple(range(1, top + 1))
        else:
            fam_levels = tuple(int(l) for l in self.levels)
            if list(fam_levels) != sorted(set(fam_levels)):
                raise ConfigError(f"levels must be strictly ascending, got {self.levels}")
            if any(l < 1 or l > top for l in fam_levels):
                raise ConfigError(
                    f"levels {fam_levels} outside the family's range 1..{top}"
                )
        if kind in SINGLE_FIDELITY_KINDS and fam_levels != (top,):
            raise ConfigError(
                f"{kind} queries only the reference level; "
                f"omit levels or pass ({top},)"
            )
        if kind in MULTI_FIDELITY_KINDS:
            if len(fam_levels) < 2:
                raise ConfigError(f"{kind} needs at least two levels, got {fam_levels}")
            if fam_levels[-1] != top:
                raise ConfigError(
                    f"the reference level {top} must be part of the subset {fam_levels}"
                )

        if self.costs is None:
            costs = tuple(family.costs[l - 1] for l in fam_levels)
        else:
            costs = tuple(float(c) for c in self.costs)
            if len(costs) != len(fam_levels):
                raise ConfigError(
                    f"cost override has {len(costs)} entries for {len(fam_levels)} levels"
                )
        try:
            schedule = CostSchedule(costs)
        except (ValueError, EmptyInput) as exc:
            raise ConfigError(f"invalid cost schedule: {exc}") from exc

        budget = 100.0 * family.dim if self.budget is None else float(self.budget)
        if budget <= 0:
            raise ConfigError(f"budget must be positive, got {budget}")

        n_map = {int(k): int(v) for k, v in (self.n_initial or {}).items()}
        stray = sorted(set(n_map) - set(fam_levels))
        if stray:
            raise ConfigError(f"n_initial names inactive levels {stray}")
        top_default = family.dim + 2
        low_default = 2 * (family.dim + 2)
        n_initial = tuple(
            n_map.get(l, top_default if l == fam_levels[-1] else low_default)
            for l in fam_levels
        )
        if any(n < 1 for n in n_initial):
            raise ConfigError("every active level needs at least one initial point")
        if n_initial[-1] < 2:
            raise ConfigError("the reference level needs at least two initial points")
        if len(fam_levels) > 1 and n_initial[0] < 2:
            raise ConfigError("the cheapest level needs at least two initial points")

        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.mes_samples < 1:
            raise ConfigError(f"mes_samples must be at least 1, got {self.mes_samples}")
        grid = 100 * family.dim if self.mes_grid is None else int(self.mes_grid)
        if grid < 2:
            raise ConfigError(f"mes_grid must be at least 2, got {grid}")

        return ResolvedExperiment(
            family=family,
            kind=kind,
            family_levels=fam_levels,
            schedule=schedule,
            budget=budget,
            n_initial=n_initial,
            mes=MesSettings(num_min_samples=int(self.mes_samples), grid_size=grid),
            trials=int(self.trials),
            seed=int(self.seed),
            charge_initial=bool(self.charge_initial_design),
            label=self.label or f"{family.name}-{kind}",
        )


@dataclass(frozen=True)
class ResolvedExperiment:
    """A validated configuration with every default materialized."""

    family: FidelityFamily
    kind: str
    family_levels: tuple[int, ...]
    schedule: CostSchedule
    budget: float
    n_initial: tuple[int, ...]
    mes: MesSettings
    trials: int
    seed: int
    charge_initial: bool
    label: str

    @property
    def is_multifidelity(self) -> bool:
        return self.kind in MULTI_FIDELITY_KINDS

    @property
    def model_level_count(self) -> int:
        return len(self.family_levels)

    def manifest_dict(self) -> dict:
        """JSON-ready closure of the configuration (replayable)."""
        return {
            "benchmark": self.family.name,
            "acquisition": self.kind,
            "levels": list(self.family_levels),
            "costs": list(self.schedule.costs),
            "budget": self.budget,
            "n_initial": {str(l): int(n) for l, n in zip(self.family_levels, self.n_initial)},
            "trials": self.trials,
            "seed": self.seed,
            "mes_samples": self.mes.num_min_samples,
            "mes_grid": self.mes.grid_size,
            "charge_initial_design": self.charge_initial,
            "label": self.label,
        }


def config_from_manifest(entry: dict) -> ExperimentConfig:
    """Rebuild a config from a manifest's configuration block."""
    try:
        return ExperimentConfig(
            benchmark=str(entry["benchmark"]),
            acquisition=str(entry["acquisition"]),
            levels=tuple(int(l) for l in entry["levels"]),
            costs=tuple(float(c) for c in entry["costs"]),
            budget=float(entry["budget"]),
            n_initial={int(k): int(v) for k, v in entry["n_initial"].items()},
            trials=int(entry["trials"]),
            seed=int(entry["seed"]),
            mes_samples=int(entry["mes_samples"]),
            mes_grid=int(entry["mes_grid"]),
            charge_initial_design=bool(entry["charge_initial_design"]),
            label=str(entry["label"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"manifest configuration block is incomplete: {exc}") from exc


@dataclass(frozen=True)
class TrialRecord:
    """One adaptive query (or the post-design state at iteration 0)."""

    iteration: int
    budget: float
    location: np.ndarray
    level: int
    observed: float
    incumbent: float
    eps_x: float
    eps_f: float
    eps_t: float


@dataclass(frozen=True)
class TrialTrace:
    """Ordered records of one trial plus its budget cap."""

    trial_index: int
    records: tuple[TrialRecord, ...]
    status: str
    b_max: float


@dataclass
class TrialState:
    """Mutable loop state; create through :func:`start_trial`."""

    resolved: ResolvedExperiment
    stream: RandomStream
    data: ObservationSet
    budget: float
    iteration: int = 0
    surrogate: GpPosterior | MfGpPosterior | None = None
    steps_since_fit: int = 0
    refit_count: int = 0


def _refit_cadence(n: int) -> int:
    if n <= 150:
        return 1
    if n <= 300:
        return 3
    if n <= 700:
        return 8
    if n <= 1500:
        return 20
    return 50


def _polish_budget(n: int) -> int:
    if n <= 300:
        return 60
    if n <= 800:
        return 35
    return 20


def _restart_budget(n: int) -> int:
    if n <= 300:
        return 10
    if n <= 800:
        return 5
    return 3


def _to_domain(family: FidelityFamily, u: np.ndarray) -> np.ndarray:
    return family.lower + np.asarray(u, dtype=float) * (family.upper - family.lower)


def initial_design(resolved: ResolvedExperiment, stream: RandomStream) -> ObservationSet:
    """Independent Latin hypercube design per active level.

    Inputs are stored in unit-cube coordinates; evaluation happens at
    the matching family fidelity. The per-point cost is recorded on the
    observation set but not charged to the trial budget unless the
    configuration says otherwise.
    """
    family = resolved.family
    d = family.dim
    data = ObservationSet(
        dim=d,
        inputs=np.empty((0, d)),
        levels=np.empty(0, dtype=int),
        values=np.empty(0),
        total_cost=0.0,
    )
    for model_level, fam_level in enumerate(resolved.family_levels, start=1):
        sub = stream.derive(_INIT, model_level)
        u = latin_hypercube(resolved.n_initial[model_level - 1], d, sub)
        y = family.evaluate_batch(fam_level, _to_domain(family, u), sub)
        cost = resolved.schedule.cost(model_level)
        for row, value in zip(u, y):
            data.append(row, model_level, float(value), cost)
    return data


def _incumbent(state: TrialState) -> Incumbent:
    """Best observed value at the reference level, in unit coordinates.

    Falls back to the best observation across all levels if the
    reference level has none (cannot happen with a valid design, but
    keeps replays of hand-built states well defined).
    """
    data = state.data
    mask = data.levels == state.resolved.model_level_count
    if not np.any(mask):
        mask = np.ones(len(data), dtype=bool)
    values = data.values[mask]
    inputs = data.inputs[mask]
    i = int(np.argmin(values))
    return Incumbent(location=inputs[i].copy(), value=float(values[i]))


def _ensure_surrogate(state: TrialState) -> None:
    n = len(state.data)
    if state.surrogate is not None and state.steps_since_fit < _refit_cadence(n):
        return
    warm = state.surrogate.params if state.surrogate is not None else None
    fit_stream = state.stream.derive(_FIT, state.refit_count)
    restarts = _restart_budget(n)
    polish = _polish_budget(n)
    if state.resolved.is_multifidelity:
        state.surrogate = fit_mf_gp(
            state.data, fit_stream, restarts=restarts,
            polish_iterations=polish, warm_start=warm,
        )
    else:
        state.surrogate = fit_gp(
            state.data, fit_stream, restarts=restarts,
            polish_iterations=polish, warm_start=warm,
        )
    state.refit_count += 1
    state.steps_since_fit = 0


def _affordable_levels(state: TrialState) -> tuple[int, ...]:
    r = state.resolved
    return tuple(
        l for l in range(1, r.model_level_count + 1)
        if state.budget + r.schedule.cost(l) <= r.budget + _BUDGET_SLACK
    )


def step(state: TrialState) -> TrialRecord:
    """One adaptive query: refit if due, choose, evaluate, record.

    Raises:
        BudgetExhausted: no level fits into the remaining budget; the
            trial is complete.
    """
    r = state.resolved
    family = r.family
    affordable = _affordable_levels(state)
    if not affordable:
        raise BudgetExhausted(
            f"remaining budget {r.budget - state.budget:.6g} affords no level"
        )
    _ensure_surrogate(state)
    g = state.surrogate
    inc = _incumbent(state)
    iteration = state.iteration + 1
    zeros = np.zeros(family.dim)
    ones = np.ones(family.dim)
    acq_stream = state.stream.derive(_ACQ, iteration)

    if r.is_multifidelity:
        if r.kind == "mfei":
            def evaluator(pts, level, _g=g, _inc=inc):
                return mf_ei_score(_g, _inc, r.schedule, pts, level)
        elif r.kind == "mfpi":
            def evaluator(pts, level, _g=g, _inc=inc):
                return mf_pi_score(_g, _inc, r.schedule, state.data, pts, level)
        else:
            draws = sample_reference_min_values(
                g, r.mes, state.stream.derive(_MES, iteration)
            )
            def evaluator(pts, level, _g=g, _draws=draws):
                return mf_mes_score(_g, _draws, r.schedule, pts, level)
        choice = maximize_mf_acquisition(evaluator, zeros, ones, affordable, acq_stream)
        u_new, model_level = choice.location, choice.level
    else:
        if r.kind == "ei":
            def evaluator(pts, _g=g, _best=inc.value):
                return ei_score(*_g.predict_batch(pts), _best)
        elif r.kind == "pi":
            def evaluator(pts, _g=g, _best=inc.value):
                return pi_score(*_g.predict_batch(pts), _best)
        else:
            draws = sample_min_values(g, r.mes, state.stream.derive(_MES, iteration))
            def evaluator(pts, _g=g, _draws=draws):
                return mes_score(*_g.predict_batch(pts), _draws)
        u_new, _ = maximize_acquisition(evaluator, zeros, ones, acq_stream)
        model_level = 1

    fam_level = r.family_levels[model_level - 1]
    x_new = _to_domain(family, u_new)
    y_new = float(
        family.evaluate_batch(
            fam_level, x_new[None, :], state.stream.derive(_NOISE, iteration)
        )[0]
    )
    cost = r.schedule.cost(model_level)
    state.data.append(u_new, model_level, y_new, cost)
    state.budget += cost
    state.iteration = iteration
    if r.is_multifidelity:
        state.surrogate = g.with_observation(u_new, model_level, y_new)
    else:
        state.surrogate = g.with_observation(u_new, y_new)
    state.steps_since_fit += 1

    best = _incumbent(state)
    point = compute_metrics(family, _to_domain(family, best.location), state.budget)
    return TrialRecord(
        iteration=iteration,
        budget=state.budget,
        location=x_new,
        level=fam_level,
        observed=y_new,
        incumbent=best.value,
        eps_x=point.eps_x,
        eps_f=point.eps_f,
        eps_t=point.eps_t,
    )


def start_trial(resolved: ResolvedExperiment, trial_index: int) -> TrialState:
    """Seed a trial stream, run the initial design, and build the state."""
    stream = RandomStream(resolved.seed).derive(int(trial_index))
    data = initial_design(resolved, stream)
    budget = data.total_cost if resolved.charge_initial else 0.0
    return TrialState(resolved=resolved, stream=stream, data=data, budget=budget)


def run_trial(
    config: ExperimentConfig | ResolvedExperiment, trial_index: int
) -> TrialTrace:
    """Run one complete trial: design, then steps until nothing is affordable.

    The record at iteration 0 captures the post-design incumbent so
    aligned curves have a defined value from budget zero.
    """
    resolved = config.resolve() if isinstance(config, ExperimentConfig) else config
    state = start_trial(resolved, trial_index)
    family = resolved.family
    inc = _incumbent(state)
    inc_domain = _to_domain(family, inc.location)
    point = compute_metrics(family, inc_domain, state.budget)
    records = [
        TrialRecord(
            iteration=0,
            budget=state.budget,
            location=inc_domain,
            level=resolved.family_levels[-1],
            observed=inc.value,
            incumbent=inc.value,
            eps_x=point.eps_x,
            eps_f=point.eps_f,
            eps_t=point.eps_t,
        )
    ]
    while True:
        try:
            records.append(step(state))
        except BudgetExhausted:
            break
    return TrialTrace(
        trial_index=int(trial_index),
        records=tuple(records),
        status="budget_exhausted",
        b_max=resolved.budget,
    )
