"""Request and response models for the HTTP service.

The wire format mirrors the engine's configuration one to one so a
manifest's configuration block, a YAML suite entry, and an experiment
request body stay interchangeable.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from ..benchmarks import FidelityFamily
from ..engine import ExperimentConfig
from ..harness import ExperimentResult, VerifyResult


class HealthResponse(BaseModel):
    status: str
    version: str


class OptimumModel(BaseModel):
    location: list[float]
    value: float
    note: str


class BenchmarkInfo(BaseModel):
    name: str
    dim: int
    level_count: int
    lower: list[float]
    upper: list[float]
    costs: list[float]
    noisy: bool
    optimum: OptimumModel
    f_max: float

    @classmethod
    def from_family(cls, family: FidelityFamily) -> "BenchmarkInfo":
        return cls(
            name=family.name,
            dim=family.dim,
            level_count=family.level_count,
            lower=family.lower.tolist(),
            upper=family.upper.tolist(),
            costs=list(family.costs),
            noisy=family.noisy,
            optimum=OptimumModel(
                location=family.optimum.location.tolist(),
                value=family.optimum.value,
                note=family.optimum.note,
            ),
            f_max=family.f_max,
        )


class ExperimentRequest(BaseModel):
    """One experiment; unset fields resolve to engine defaults."""

    model_config = ConfigDict(extra="forbid")

    benchmark: str
    acquisition: str
    levels: Optional[list[int]] = None
    costs: Optional[list[float]] = None
    budget: Optional[float] = None
    n_initial: Optional[dict[int, int]] = None
    trials: int = 10
    seed: int = 0
    mes_samples: int = 10
    mes_grid: Optional[int] = None
    charge_initial_design: bool = False
    label: Optional[str] = None
    workers: int = Field(default=1, ge=1)

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            benchmark=self.benchmark,
            acquisition=self.acquisition,
            levels=tuple(self.levels) if self.levels is not None else None,
            costs=tuple(self.costs) if self.costs is not None else None,
            budget=self.budget,
            n_initial=dict(self.n_initial) if self.n_initial is not None else None,
            trials=self.trials,
            seed=self.seed,
            mes_samples=self.mes_samples,
            mes_grid=self.mes_grid,
            charge_initial_design=self.charge_initial_design,
            label=self.label,
        )


class TrialRecordModel(BaseModel):
    iteration: int
    budget: float
    location: list[float]
    level: int
    observed: float
    incumbent: float
    eps_x: float
    eps_f: float
    eps_t: float


class TrialTraceModel(BaseModel):
    trial_index: int
    records: list[TrialRecordModel]
    status: str
    b_max: float


class CurveModel(BaseModel):
    budget: list[float]
    median: list[float]
    p25: list[float]
    p75: list[float]


class ExperimentResponse(BaseModel):
    label: str
    manifest: dict
    traces: list[TrialTraceModel]
    curve: CurveModel
    final_median: float

    @classmethod
    def from_result(cls, result: ExperimentResult, manifest: dict) -> "ExperimentResponse":
        return cls(
            label=result.resolved.label,
            manifest=manifest,
            traces=[
                TrialTraceModel(
                    trial_index=trace.trial_index,
                    records=[
                        TrialRecordModel(
                            iteration=r.iteration,
                            budget=r.budget,
                            location=list(map(float, r.location)),
                            level=r.level,
                            observed=r.observed,
                            incumbent=r.incumbent,
                            eps_x=r.eps_x,
                            eps_f=r.eps_f,
                            eps_t=r.eps_t,
                        )
                        for r in trace.records
                    ],
                    status=trace.status,
                    b_max=trace.b_max,
                )
                for trace in result.traces
            ],
            curve=CurveModel(
                budget=result.curve.budget.tolist(),
                median=result.curve.median.tolist(),
                p25=result.curve.p25.tolist(),
                p75=result.curve.p75.tolist(),
            ),
            final_median=result.final_median,
        )


class SuiteRequest(BaseModel):
    """Same shape as the YAML suite file, minus the output directory."""

    model_config = ConfigDict(extra="forbid")

    experiments: list[dict]
    defaults: dict = Field(default_factory=dict)
    workers: int = Field(default=1, ge=1)


class SuiteResponse(BaseModel):
    results: list[ExperimentResponse]
    table: str


class VerifyEntry(BaseModel):
    name: str
    passed: bool
    detail: str

    @classmethod
    def from_result(cls, result: VerifyResult) -> "VerifyEntry":
        return cls(name=result.name, passed=result.passed, detail=result.detail)


class VerifyResponse(BaseModel):
    all_passed: bool
    results: list[VerifyEntry]
