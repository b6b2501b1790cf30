"""CLI entry point for rc-treatment-effects."""

from __future__ import annotations

import asyncio
import logging
import signal
from dataclasses import asdict
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
import typer

from .config import AppConfig, ConfigError, DgpSpec
from .dgp import generate
from .estimation.base import EstimationError, Sample
from .estimation.bounds import (
    estimate_partial_cdfs,
    estimate_ucvate_parts,
    estimate_variance_moments,
    makarov_bounds_curve,
    variance_bound_check,
    variance_bounds,
)
from .estimation.deconv import estimate_f_delta_curve, estimate_ucdite_curve, prob_positive_effect
from .estimation.estimators import (
    RadonPipeline,
    estimate_ate,
    estimate_marginal_cdf_grid,
    estimate_tt,
    estimate_tut,
    estimate_ucate_parts,
    marginal_cdf_functional,
    qte,
    tt_weight,
)
from .metrics import create_metrics_collector
from .oracles import run_oracles
from .replication import box_label
from .runtime import StudyRuntime, _level_for, convergence_diagnostic
from .store import DirectoryResultStore, create_result_store

app = typer.Typer(help="Estimate treatment effects under a random-coefficients selection equation.")

ESTIMATES = ("density", "ucate", "ucdite", "fdelta", "ate", "tt", "cdf", "qte", "variance", "bounds")
QTE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=_level_for(level),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def _load_config(path: Optional[Path]) -> AppConfig:
    try:
        config = AppConfig.from_file(path)
    except ConfigError as exc:
        typer.secho(f"Configuration error: {exc}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=2) from exc
    _configure_logging(config.runtime.log_level)
    return config


def _fail(exc: EstimationError) -> typer.Exit:
    typer.secho(f"Estimation failed: [{exc.code}] {exc.message}", fg=typer.colors.RED, err=True)
    return typer.Exit(code=3)


def _config_fail(message: str) -> typer.Exit:
    typer.secho(f"Configuration error: {message}", fg=typer.colors.RED, err=True)
    return typer.Exit(code=2)


def _parse_floats(raw: str, name: str, size: Optional[int] = None) -> List[float]:
    try:
        values = [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise _config_fail(f"{name} must be comma-separated numbers, got {raw!r}") from exc
    if size is not None and len(values) != size:
        raise _config_fail(f"{name} needs {size} values, got {len(values)}")
    return values


def _install_signal_handlers(runtime: StudyRuntime) -> Callable[[], None]:
    loop = asyncio.get_running_loop()

    def _stop(*_: object) -> None:
        runtime.request_shutdown()

    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, _stop)
        except NotImplementedError:
            pass

    def _restore() -> None:
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.remove_signal_handler(sig)
            except NotImplementedError:
                pass

    return _restore


@app.command()
def simulate(
    n: int = typer.Option(10000, "--n", help="Number of observations."),
    seed: int = typer.Option(0, "--seed", help="Random seed."),
    dgp: str = typer.Option("baseline", "--dgp", help="Design variant."),
    out: Path = typer.Option(..., "--out", help="Output CSV path."),
) -> None:
    """Draw a sample from one of the simulation designs and write it as CSV."""
    try:
        spec = DgpSpec(variant=dgp, n=n, seed=seed)
    except ConfigError as exc:
        raise _config_fail(str(exc)) from exc
    sample = generate(spec)
    out.parent.mkdir(parents=True, exist_ok=True)
    sample.to_csv(out)
    typer.secho(f"Wrote {sample.n} observations to {out}", fg=typer.colors.GREEN)


def _load_sample(config: AppConfig, path: Optional[Path]) -> Sample:
    if path is None:
        return generate(config.dgp)
    if not path.exists():
        raise _config_fail(f"Sample file not found: {path}")
    try:
        return Sample.read_csv(path)
    except EstimationError as exc:
        raise _fail(exc) from exc


def _run_estimate(
    what: str,
    config: AppConfig,
    sample: Sample,
    store: DirectoryResultStore,
    gamma: Sequence[float],
    deltas: np.ndarray,
) -> None:
    est = config.estimator
    boxes = config.study.boxes
    if what == "density":
        parts = estimate_ucate_parts(sample, est)
        store.write_table("density", parts.density.to_frame())
    elif what == "ucate":
        parts = estimate_ucate_parts(sample, est)
        store.write_table("ucate", parts.ucate.to_frame())
        store.write_table("ucate_times_density", parts.ucate_times_f.to_frame())
    elif what in ("ate", "tt"):
        parts = estimate_ucate_parts(sample, est)
        payload = {"ate": {box_label(k): estimate_ate(parts.ucate_times_f, box) for k, box in enumerate(boxes)}}
        if what == "tt":
            weight = tt_weight(sample)
            payload["tt"] = {
                box_label(k): estimate_tt(sample, parts.ucate_times_f, box, weight=weight) for k, box in enumerate(boxes)
            }
            payload["tut"] = {box_label(k): estimate_tut(sample, parts.ucate_times_f, box) for k, box in enumerate(boxes)}
        store.write_json("effects", payload)
    elif what == "ucdite":
        curve = estimate_ucdite_curve(sample, est, config.deconv, deltas, gamma)
        store.write_table("ucdite", pd.DataFrame({"delta": curve.deltas, "value": curve.values}))
        store.write_json("ucdite", {"gamma": list(gamma), "fully_trimmed": curve.fully_trimmed})
    elif what == "fdelta":
        curve = estimate_f_delta_curve(sample, est, config.deconv, deltas, boxes[0])
        store.write_table("f_delta", pd.DataFrame({"delta": curve.deltas, "value": curve.values}))
        store.write_json(
            "f_delta",
            {
                "prob_positive": prob_positive_effect(curve),
                "trimmed_nodes": curve.trimmed_nodes,
                "mass_density": curve.mass_density,
            },
        )
    elif what == "cdf":
        lam = marginal_cdf_functional(sample, est, boxes[0], pipeline=RadonPipeline(sample, est))
        f0 = estimate_marginal_cdf_grid(sample, est, 0, None, boxes[0], functional=lam)
        f1 = estimate_marginal_cdf_grid(sample, est, 1, f0.y_grid, boxes[0], functional=lam)
        store.write_table("cdf", pd.DataFrame({"y": f0.y_grid, "F0": f0.cdf, "F1": f1.cdf}))
    elif what == "qte":
        results = {f"{level:g}": qte(sample, est, level, boxes[0])._asdict() for level in QTE_LEVELS}
        store.write_json("qte", results)
    elif what == "variance":
        parts = estimate_ucvate_parts(sample, est)
        var_delta = parts.variance(boxes[0])
        moments = estimate_variance_moments(sample, est, boxes[0], var_delta=var_delta)
        check = variance_bound_check(moments)
        low, high = variance_bounds(moments.m0, moments.m1, moments.ate)
        store.write_table("ucvate", parts.ucvate.to_frame())
        store.write_json(
            "variance",
            {
                "moments": asdict(moments),
                "lhs": check.lhs,
                "rhs": check.rhs,
                "holds": check.holds,
                "bounds": [low, high],
            },
        )
    elif what == "bounds":
        g0, g1 = estimate_partial_cdfs(sample, est, box=boxes[0])
        store.write_table("makarov", makarov_bounds_curve(g0, g1, deltas))


@app.command()
def estimate(
    what: str = typer.Option(..., "--what", help=f"One of {', '.join(ESTIMATES)}."),
    config_path: Optional[Path] = typer.Option(None, "--config", help="JSON configuration file."),
    sample_path: Optional[Path] = typer.Option(None, "--sample", help="Sample CSV; simulated from the config when absent."),
    out: Path = typer.Option(Path("results"), "--out", help="Output directory."),
    gamma: str = typer.Option("1,-0.5", "--gamma", help="Coefficient point for ucdite."),
    deltas: str = typer.Option("-10,20,121", "--deltas", help="Effect grid as start,stop,count."),
) -> None:
    """Run one estimator on a sample and write its grids, tables or summaries."""
    if what not in ESTIMATES:
        raise _config_fail(f"--what must be one of {ESTIMATES}, got {what!r}")
    config = _load_config(config_path)
    gamma_point = _parse_floats(gamma, "--gamma", 2)
    start, stop, count = _parse_floats(deltas, "--deltas", 3)
    if count < 2 or stop <= start:
        raise _config_fail("--deltas needs start < stop and count >= 2")
    delta_grid = np.linspace(start, stop, int(count))
    sample = _load_sample(config, sample_path)
    store = DirectoryResultStore(out)
    try:
        _run_estimate(what, config, sample, store, gamma_point, delta_grid)
    except EstimationError as exc:
        raise _fail(exc) from exc
    typer.secho(f"Wrote {what} results to {out}", fg=typer.colors.GREEN)


@app.command()
def mc(
    config_path: Optional[Path] = typer.Option(None, "--config", help="JSON configuration file."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory for tables."),
) -> None:
    """Run the Monte-Carlo study until done or interrupted."""
    config = _load_config(config_path)
    settings = config.runtime
    metrics = create_metrics_collector(
        settings.metrics_backend, study_id=config.study.study_id, port=settings.metrics_port
    )
    runtime = StudyRuntime(
        config=config.study,
        workers=settings.workers,
        metrics=metrics,
        store=create_result_store(out),
        log_level=settings.log_level,
        progress_logging=settings.progress_logging,
    )

    async def _runner():
        restore_signals = _install_signal_handlers(runtime)
        try:
            return await runtime.run()
        finally:
            restore_signals()

    try:
        result = asyncio.run(_runner())
    except KeyboardInterrupt:  # pragma: no cover - handled by signal handlers
        typer.secho("Shutdown requested", fg=typer.colors.YELLOW)
        raise typer.Exit(code=1)
    typer.echo(result.effects_table().to_string(index=False))
    if result.incomplete:
        typer.secho(
            f"Study incomplete: {len(result.outcomes)} of {result.requested} replications, {result.failed} failed",
            fg=typer.colors.YELLOW,
        )


@app.command()
def oracle(
    out: Path = typer.Option(Path("golden"), "--out", help="Directory for golden.json."),
    skip_radon: bool = typer.Option(False, "--skip-radon", help="Skip the Radon-inversion oracles."),
) -> None:
    """Compute every reference value and write golden.json."""
    _configure_logging("INFO")
    try:
        golden = run_oracles(DirectoryResultStore(out), include_radon=not skip_radon)
    except EstimationError as exc:
        raise _fail(exc) from exc
    typer.secho(f"Wrote {len(golden)} oracle values to {out / 'golden.json'}", fg=typer.colors.GREEN)


@app.command()
def converge(
    n_list: str = typer.Option("2500,10000,40000", "--n-list", help="Increasing sample sizes."),
    replications: int = typer.Option(10, "--replications", help="Replications per sample size."),
    estimand: str = typer.Option("density", "--estimand", help="density or ucate_f."),
    config_path: Optional[Path] = typer.Option(None, "--config", help="JSON configuration file."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory."),
) -> None:
    """Median grid error against sample size, with the log-log slope."""
    config = _load_config(config_path)
    sizes = [int(value) for value in _parse_floats(n_list, "--n-list")]
    try:
        result = convergence_diagnostic(estimand, sizes, replications, study=config.study)
    except EstimationError as exc:
        raise _fail(exc) from exc
    store = create_result_store(out)
    store.write_table("convergence", result.to_frame())
    store.write_json("convergence", {"rows": result.rows, "slope": result.slope, "slope_defined": result.slope_defined})
    typer.echo(result.to_frame().to_string(index=False))
    typer.echo(f"slope: {result.slope:.3f}" if result.slope_defined else "slope: undefined")


def main() -> None:
    """Entry point for console script."""
    app()


if __name__ == "__main__":
    main()
