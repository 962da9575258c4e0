"""HTTP service exposing the benchmark registry and experiment runner.

The CLI talks to this app in process through an ASGI transport by
default, so the same handlers serve local runs and a remote server.
Results travel as JSON; artifact files are written by the client from
the response, which keeps the service stateless.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .._version import __version__
from ..benchmarks import lookup, registry
from ..errors import MfboError, UnknownAcquisition, UnknownBenchmark
from ..harness import (
    build_manifest,
    run_experiment,
    run_suite,
    suite_from_entries,
    summary_table,
    verify_registry,
)
from .schemas import (
    BenchmarkInfo,
    ExperimentRequest,
    ExperimentResponse,
    HealthResponse,
    SuiteRequest,
    SuiteResponse,
    VerifyEntry,
    VerifyResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="mfbo", version=__version__)

    @app.exception_handler(UnknownBenchmark)
    @app.exception_handler(UnknownAcquisition)
    async def _unknown(request: Request, exc: MfboError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(MfboError)
    async def _bad_request(request: Request, exc: MfboError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/benchmarks", response_model=list[BenchmarkInfo])
    async def list_benchmarks() -> list[BenchmarkInfo]:
        return [BenchmarkInfo.from_family(f) for f in registry().values()]

    @app.get("/benchmarks/{name}", response_model=BenchmarkInfo)
    async def get_benchmark(name: str) -> BenchmarkInfo:
        return BenchmarkInfo.from_family(lookup(name))

    @app.post("/verify", response_model=VerifyResponse)
    async def verify() -> VerifyResponse:
        results = verify_registry()
        return VerifyResponse(
            all_passed=all(r.passed for r in results),
            results=[VerifyEntry.from_result(r) for r in results],
        )

    @app.post("/experiments", response_model=ExperimentResponse)
    async def run_one(request: ExperimentRequest) -> ExperimentResponse:
        resolved = request.to_config().resolve()
        result = run_experiment(resolved, workers=request.workers)
        return ExperimentResponse.from_result(result, build_manifest(resolved))

    @app.post("/suites", response_model=SuiteResponse)
    async def run_many(request: SuiteRequest) -> SuiteResponse:
        spec = suite_from_entries(
            request.experiments,
            request.defaults,
            workers=request.workers,
            where="request",
        )
        results = run_suite(spec)
        return SuiteResponse(
            results=[
                ExperimentResponse.from_result(res, build_manifest(res.resolved))
                for res in results
            ],
            table=summary_table(results),
        )

    return app
