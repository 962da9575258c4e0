"""Command line front door.

Every data-bearing command talks to the HTTP service: against a remote
base URL when ``--server`` is given, otherwise against the app mounted
in process through an ASGI transport, so both paths exercise the same
handlers. Artifact files are always written on the client side from
the response payload.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime
failure.
"""

from __future__ import annotations

import asyncio
import os
from pathlib import Path
from types import SimpleNamespace
from typing import Optional, Sequence

import click
import httpx
import numpy as np

from ._version import __version__
from .engine import ExperimentConfig, config_from_manifest
from .errors import ConfigError, MfboError, UnknownAcquisition, UnknownBenchmark
from .harness import budget_to_tolerance, parse_suite_config
from .metrics import AggregateCurve, emit, read_manifest

_OUTPUT_ENV = "MFBO_OUTPUT_DIR"
_DEFAULT_OUTPUT = "results"


class _RemoteRejection(Exception):
    """Server answered with an error status; carries (status, message)."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class _Api:
    """Tiny synchronous facade over the service."""

    def __init__(self, server: str | None):
        self._server = server.rstrip("/") if server else None

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self._server is None:
            response = asyncio.run(self._in_process(method, path, payload))
        else:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                response = client.request(method, path, json=payload)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise _RemoteRejection(response.status_code, str(detail))
        return response.json()

    async def _in_process(self, method: str, path: str, payload: dict | None) -> httpx.Response:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service.internal", timeout=None
        ) as client:
            return await client.request(method, path, json=payload)


def _parse_levels(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"levels must be comma-separated integers: {exc}")


def _parse_costs(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"costs must be comma-separated numbers: {exc}")


def _parse_n_initial(text: str | None) -> dict[int, int] | None:
    if text is None:
        return None
    try:
        out: dict[int, int] = {}
        for part in text.split(","):
            level, count = part.split("=")
            out[int(level)] = int(count)
        return out
    except ValueError as exc:
        raise click.BadParameter(f"n-initial takes LEVEL=COUNT pairs: {exc}")


def _entry_from_config(cfg: ExperimentConfig) -> dict:
    entry: dict = {
        "benchmark": cfg.benchmark,
        "acquisition": cfg.acquisition,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "mes_samples": cfg.mes_samples,
        "charge_initial_design": cfg.charge_initial_design,
    }
    if cfg.levels is not None:
        entry["levels"] = list(cfg.levels)
    if cfg.costs is not None:
        entry["costs"] = list(cfg.costs)
    if cfg.budget is not None:
        entry["budget"] = cfg.budget
    if cfg.n_initial is not None:
        entry["n_initial"] = {str(k): int(v) for k, v in cfg.n_initial.items()}
    if cfg.mes_grid is not None:
        entry["mes_grid"] = cfg.mes_grid
    if cfg.label is not None:
        entry["label"] = cfg.label
    return entry


def _traces_from_payload(payload: list[dict]) -> list[SimpleNamespace]:
    traces = []
    for t in payload:
        records = tuple(
            SimpleNamespace(
                iteration=r["iteration"],
                budget=r["budget"],
                location=np.asarray(r["location"], dtype=float),
                level=r["level"],
                observed=r["observed"],
                incumbent=r["incumbent"],
                eps_x=r["eps_x"],
                eps_f=r["eps_f"],
                eps_t=r["eps_t"],
            )
            for r in t["records"]
        )
        traces.append(
            SimpleNamespace(
                trial_index=t["trial_index"],
                records=records,
                status=t["status"],
                b_max=t["b_max"],
            )
        )
    return traces


def _curve_from_payload(payload: dict) -> AggregateCurve:
    return AggregateCurve(
        budget=np.asarray(payload["budget"], dtype=float),
        median=np.asarray(payload["median"], dtype=float),
        p25=np.asarray(payload["p25"], dtype=float),
        p75=np.asarray(payload["p75"], dtype=float),
    )


def _default_out() -> str:
    return os.environ.get(_OUTPUT_ENV, _DEFAULT_OUTPUT)


def _write_experiment(result: dict, out_dir: str) -> list[Path]:
    curve = _curve_from_payload(result["curve"])
    traces = _traces_from_payload(result["traces"])
    return emit(curve, traces, out_dir, result["label"], result["manifest"])


def _report_experiment(result: dict, written: Sequence[Path]) -> None:
    curve = _curve_from_payload(result["curve"])
    crossing = budget_to_tolerance(curve)
    click.echo(f"{result['label']}: {len(result['traces'])} trials, "
               f"final median eps_t {result['final_median']:.6f}")
    if crossing is None:
        click.echo("  median never reaches eps_t <= 0.05")
    else:
        click.echo(f"  median reaches eps_t <= 0.05 at B = {crossing:g}")
    if written:
        click.echo(f"  wrote {len(written)} files under {written[0].parent}")


@click.group(name="mfbo")
@click.version_option(version=__version__, prog_name="mfbo")
def cli() -> None:
    """Multifidelity Bayesian optimization benchmark harness."""


@cli.command(name="list")
@click.option("--server", default=None, help="Base URL of a running service.")
def list_benchmarks(server: str | None) -> None:
    """Print every registered benchmark family."""
    rows = _Api(server).request("GET", "/benchmarks")
    header = f"{'name':16s} {'D':>2s} {'L':>2s} {'domain':22s} {'costs':26s} optimum"
    click.echo(header)
    click.echo("-" * len(header))
    for row in rows:
        domain = f"[{row['lower'][0]:g}, {row['upper'][0]:g}]^{row['dim']}"
        costs = ",".join(f"{c:g}" for c in row["costs"])
        noisy = " (noisy)" if row["noisy"] else ""
        click.echo(
            f"{row['name']:16s} {row['dim']:2d} {row['level_count']:2d} "
            f"{domain:22s} {costs:26s} f* = {row['optimum']['value']:g}{noisy}"
        )


@cli.command()
@click.option("--server", default=None, help="Base URL of a running service.")
def verify(server: str | None) -> None:
    """Re-derive every optimum record and report agreement."""
    payload = _Api(server).request("POST", "/verify")
    for row in payload["results"]:
        flag = "ok  " if row["passed"] else "FAIL"
        click.echo(f"{flag} {row['name']:16s} {row['detail']}")
    if not payload["all_passed"]:
        raise MfboError("registry verification failed")
    click.echo("all families verified")


@cli.command()
@click.option("--benchmark", default=None, help="Registered family name.")
@click.option("--acq", default=None, help="ei | pi | mes | mfei | mfpi | mfmes.")
@click.option("--levels", default=None, help="Comma-separated family levels, e.g. 1,2,3,4.")
@click.option("--costs", default=None, help="Comma-separated cost override per level.")
@click.option("--budget", default=None, type=float, help="Budget cap (default 100 per dimension).")
@click.option("--trials", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--n-initial", default=None, help="Initial design sizes, e.g. 1=12,4=3.")
@click.option("--mes-samples", default=10, show_default=True, type=int)
@click.option("--mes-grid", default=None, type=int, help="MES grid size (default 100 per dimension).")
@click.option("--charge-initial", is_flag=True, help="Charge the initial design to the budget.")
@click.option("--label", default=None, help="Artifact name stem.")
@click.option("--workers", default=1, show_default=True, type=int, help="Parallel trial workers.")
@click.option("--out", default=None, help=f"Output directory (default ${_OUTPUT_ENV} or ./{_DEFAULT_OUTPUT}).")
@click.option("--from-manifest", "manifest_path", default=None,
              help="Replay the configuration stored in a run manifest.")
@click.option("--server", default=None, help="Base URL of a running service.")
def bench(
    benchmark: str | None,
    acq: str | None,
    levels: str | None,
    costs: str | None,
    budget: float | None,
    trials: int,
    seed: int,
    n_initial: str | None,
    mes_samples: int,
    mes_grid: int | None,
    charge_initial: bool,
    label: str | None,
    workers: int,
    out: str | None,
    manifest_path: str | None,
    server: str | None,
) -> None:
    """Run one experiment and write its artifacts."""
    if manifest_path is not None:
        if benchmark is not None or acq is not None:
            raise click.UsageError("--from-manifest replaces --benchmark/--acq")
        manifest = read_manifest(manifest_path)
        if "configuration" not in manifest:
            raise ConfigError(f"{manifest_path} has no configuration block")
        config = config_from_manifest(manifest["configuration"])
    else:
        if benchmark is None or acq is None:
            raise click.UsageError("--benchmark and --acq are required (or --from-manifest)")
        config = ExperimentConfig(
            benchmark=benchmark,
            acquisition=acq,
            levels=_parse_levels(levels),
            costs=_parse_costs(costs),
            budget=budget,
            n_initial=_parse_n_initial(n_initial),
            trials=trials,
            seed=seed,
            mes_samples=mes_samples,
            mes_grid=mes_grid,
            charge_initial_design=charge_initial,
            label=label,
        )
    config.resolve()  # reject bad combinations before any work happens

    entry = _entry_from_config(config)
    entry["workers"] = workers
    result = _Api(server).request("POST", "/experiments", entry)
    written = _write_experiment(result, out or _default_out())
    _report_experiment(result, written)


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Output directory override.")
@click.option("--workers", default=None, type=int, help="Worker count override.")
@click.option("--server", default=None, help="Base URL of a running service.")
def suite(
    config_file: str,
    out: str | None,
    workers: int | None,
    server: str | None,
) -> None:
    """Run every experiment in a YAML suite file."""
    spec = parse_suite_config(config_file)
    payload = {
        "experiments": [_entry_from_config(cfg) for cfg in spec.configs],
        "workers": workers if workers is not None else spec.workers,
    }
    response = _Api(server).request("POST", "/suites", payload)
    out_dir = out or spec.out_dir or _default_out()
    total = 0
    for result in response["results"]:
        written = _write_experiment(result, out_dir)
        total += len(written)
    click.echo(response["table"])
    click.echo(f"wrote {total} files under {out_dir}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Serve the HTTP API."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the exit status instead of raising."""
    try:
        cli.main(args=list(argv) if argv is not None else None,
                 prog_name="mfbo", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ConfigError, UnknownBenchmark, UnknownAcquisition) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except _RemoteRejection as exc:
        click.echo(f"error: {exc}", err=True)
        return 1 if exc.status < 500 else 2
    except MfboError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (httpx.HTTPError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entry() -> None:
    raise SystemExit(main())
