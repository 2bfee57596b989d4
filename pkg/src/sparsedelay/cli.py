"""Command-line front end.

Subcommands: estimate delays from series files, fit simulator parameters
from precipitation data, generate synthetic pairs, run Monte Carlo
benchmarks, and aggregate per-year estimates. Hard errors (unreadable files,
schema violations) exit nonzero with a diagnostic; per-series failures
become flagged rows and never abort a batch.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from types import SimpleNamespace

import click
import numpy as np

from . import __version__
from .bench import (
    ScenarioConfig,
    emit_table,
    resolve_workers,
    run_scenario,
)
from .errors import SeriesFormatError, SparseDelayError, TooShort, ZeroVariance
from .regions import RegionParams, default_regions, load_regions, save_regions
from .seriesio import read_series, series_text, write_manifest, write_series
from .simulate import (
    MONTH_NAMES,
    AmountModel,
    ImpulseSpec,
    estimate_transition_matrix_pooled,
    fit_exponential_rate,
    month_of_day,
    simulate_pair,
)
from .tde import (
    ESTIMATOR_ORDER,
    ESTIMATORS,
    aggregate_years,
    estimate_delay,
    restrict_grid,
)


def _hard(message: str):
    raise click.ClickException(message)


def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _deliver(text, out, command, parameters, seeds=()):
    """Print to stdout, or write the file plus its manifest."""
    if out is None:
        click.echo(text, nl=False)
        return
    Path(out).write_text(text)
    write_manifest(out, command, parameters, seeds)


def _load_region(params_path, region_name):
    try:
        regions = (
            default_regions() if params_path is None else load_regions(params_path)
        )
    except (OSError, ValueError, SparseDelayError) as exc:
        _hard(str(exc))
    if region_name is None:
        return next(iter(regions.values()))
    if region_name not in regions:
        _hard(
            f"region {region_name!r} not in parameter file "
            f"(available: {', '.join(regions)})"
        )
    return regions[region_name]


@click.group()
@click.version_option(__version__, prog_name="sparsedelay")
def main():
    """Delay estimation between sparse daily series."""


# ------------------------------------------------------------------ estimate


@main.command("estimate")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--estimator",
    "estimator_name",
    default="pn",
    show_default=True,
    type=click.Choice(ESTIMATOR_ORDER),
)
@click.option("--grid-fraction", default=0.4, show_default=True, type=float)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--x-col", default="x", show_default=True)
@click.option("--y-col", default="y", show_default=True)
@click.option("--id-col", default="id", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cmd_estimate(input_path, estimator_name, grid_fraction, alpha, x_col, y_col, id_col, out):
    """Estimate the delay for every series in INPUT_PATH.

    Writes one row per series: id, lag_hat, gamma, p_value, significant,
    status, reason. Estimation failures become rows with status "failed".
    """
    if not 0.0 < grid_fraction <= 1.0:
        _hard("--grid-fraction must lie in (0, 1]")
    if not 0.0 < alpha <= 1.0:
        _hard("--alpha must lie in (0, 1]")
    try:
        records = read_series(input_path, x_col, y_col, id_col)
    except SeriesFormatError as exc:
        _hard(str(exc))
    if not records:
        _hard(f"{input_path}: no series found")
    spec = ESTIMATORS[estimator_name]
    rows = []
    for record in records:
        label = record.id if record.id is not None else ""
        try:
            # a constant column carries no delay information, whatever the
            # scaling; refuse it up front instead of reporting a vacuous lag
            for name, column in ((x_col, record.x), (y_col, record.y)):
                if column.size and (column == column[0]).all():
                    raise ZeroVariance(f"column {name!r} is constant")
            grid = restrict_grid(record.x.size, grid_fraction)
            result = estimate_delay(record.x, record.y, grid, spec)
        except SparseDelayError as exc:
            rows.append([label, "", "", "", "", "failed", f"{type(exc).__name__}: {exc}"])
            continue
        rows.append(
            [
                label,
                result.lag_hat,
                repr(result.gamma_at_lag),
                repr(result.p_value),
                "true" if result.p_value < alpha else "false",
                "ok",
                "degenerate_overlap" if result.degenerate_overlap else "",
            ]
        )
    text = _csv_text(
        ["id", "lag_hat", "gamma", "p_value", "significant", "status", "reason"], rows
    )
    _deliver(
        text,
        out,
        "estimate",
        {
            "input": str(input_path),
            "estimator": estimator_name,
            "grid_fraction": grid_fraction,
            "alpha": alpha,
            "x_col": x_col,
            "y_col": y_col,
            "id_col": id_col,
        },
    )


# ------------------------------------------------------------------ fit-params


@main.command("fit-params")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--x-col", default="x", show_default=True)
@click.option("--id-col", default="id", show_default=True)
@click.option("--region-name", default="fitted", show_default=True)
def cmd_fit_params(input_path, out_path, x_col, id_col, region_name):
    """Fit chain probabilities and monthly amount rates from precipitation.

    INPUT_PATH needs day and precipitation columns; multiple ids are pooled.
    Months without wet days get the median of the fitted rates, flagged in
    the output file's comments.
    """
    try:
        records = read_series(input_path, x_col, None, id_col)
    except SeriesFormatError as exc:
        _hard(str(exc))
    if not records:
        _hard(f"{input_path}: no series found")
    occurrences = [(record.x > 0).astype(np.int64) for record in records]
    try:
        tm = estimate_transition_matrix_pooled(occurrences)
    except (TooShort, ValueError) as exc:
        _hard(str(exc))

    by_month = [[] for _ in range(12)]
    for record in records:
        wet = record.x > 0
        months = month_of_day(record.day[wet])
        for month, amount in zip(months, record.x[wet]):
            by_month[month].append(float(amount))
    rates: list = [None] * 12
    for month, amounts in enumerate(by_month):
        if amounts:
            rates[month] = fit_exponential_rate(amounts)
    observed = [r for r in rates if r is not None]
    flagged = [MONTH_NAMES[m] for m in range(12) if rates[m] is None]
    fallback = float(np.median(observed)) if observed else 1.0
    rates = [fallback if r is None else r for r in rates]

    region = RegionParams(region_name, tm, AmountModel.monthly(rates))
    save_regions(out_path, {region_name: region})
    comments = [f"# fitted from {input_path} ({len(records)} series)"]
    if tm.defaulted_rows:
        comments.append(
            "# transition rows defaulted (state never seen as origin): "
            + ", ".join(tm.defaulted_rows)
        )
    if flagged:
        source = "median of fitted months" if observed else "1.0 (no wet days at all)"
        comments.append(
            f"# rates defaulted to {source}: " + ", ".join(f"rate_{m}" for m in flagged)
        )
    body = Path(out_path).read_text()
    Path(out_path).write_text("\n".join(comments) + "\n" + body)
    write_manifest(
        out_path,
        "fit-params",
        {
            "input": str(input_path),
            "x_col": x_col,
            "id_col": id_col,
            "region_name": region_name,
            "defaulted_transition_rows": list(tm.defaulted_rows),
            "defaulted_months": flagged,
        },
    )
    click.echo(
        f"fitted {region_name}: p_dry_wet={tm.p_dry_wet:.4g} "
        f"p_wet_dry={tm.p_wet_dry:.4g}, {12 - len(flagged)} months with wet days",
        err=True,
    )


# ------------------------------------------------------------------ simulate


@main.command("simulate")
@click.option("--params", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--region", "region_name", default=None)
@click.option("--tau", type=int, required=True)
@click.option(
    "--lambda",
    "lam",
    type=float,
    default=None,
    help="Mean wet-day amount; omitted: use the region's monthly rates.",
)
@click.option("--n", default=366, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--support-start", default=110, show_default=True, type=int)
@click.option("--support-end", default=183, show_default=True, type=int)
@click.option("--sigma-d", default=0.0075, show_default=True, type=float)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cmd_simulate(params, region_name, tau, lam, n, seed, support_start, support_end, sigma_d, out):
    """Write one simulated pair as a day/x/y series file."""
    region = _load_region(params, region_name)
    amount = lam if lam is not None else region.amounts
    try:
        spec = ImpulseSpec(tau, n, support_start, support_end, sigma_d)
        pair = simulate_pair(spec, region.transition, amount, seed)
    except (SparseDelayError, ValueError) as exc:
        _hard(str(exc))
    comments = [
        f"seed={seed}",
        f"tau={tau}",
        f"lambda={lam if lam is not None else 'monthly'}",
        f"region={region.name}",
    ]
    text = series_text(np.arange(1, n + 1), pair.x, pair.y, comments)
    _deliver(
        text,
        out,
        "simulate",
        {
            "params": str(params) if params else "packaged",
            "region": region.name,
            "tau": tau,
            "lambda": lam,
            "n": n,
            "support_start": support_start,
            "support_end": support_end,
            "sigma_d": sigma_d,
        },
        seeds=[seed],
    )


# ------------------------------------------------------------------ bench


_CONFIG_KEYS = {
    "params_path",
    "regions",
    "taus",
    "lambdas",
    "estimators",
    "reps",
    "n",
    "grid_fraction",
    "root_seed",
    "sigma_d",
    "support",
}


def _bench_scenarios(config_path, reps_override, seed_override):
    try:
        raw = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _hard(f"{config_path}: {exc}")
    if not isinstance(raw, dict):
        _hard(f"{config_path}: top level must be an object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        _hard(f"{config_path}: unknown keys {', '.join(sorted(unknown))}")
    for key in ("taus", "lambdas"):
        if key not in raw or not isinstance(raw[key], list) or not raw[key]:
            _hard(f"{config_path}: {key!r} must be a nonempty list")

    params_path = raw.get("params_path")
    try:
        regions = default_regions() if params_path is None else load_regions(params_path)
    except (OSError, ValueError, SparseDelayError) as exc:
        _hard(str(exc))
    wanted = raw.get("regions", list(regions))
    missing = [name for name in wanted if name not in regions]
    if missing:
        _hard(f"{config_path}: unknown regions {', '.join(missing)}")

    names = raw.get("estimators", list(ESTIMATOR_ORDER))
    bad = [name for name in names if name not in ESTIMATORS]
    if bad:
        _hard(f"{config_path}: unknown estimators {', '.join(bad)}")
    estimators = tuple(ESTIMATORS[name] for name in names)

    reps = reps_override if reps_override is not None else int(raw.get("reps", 200))
    root_seed = seed_override if seed_override is not None else int(raw.get("root_seed", 0))
    support = raw.get("support", [110, 183])
    if not (isinstance(support, list) and len(support) == 2):
        _hard(f"{config_path}: 'support' must be [start, end]")

    scenarios = []
    try:
        for name in wanted:
            for tau in raw["taus"]:
                for amount in raw["lambdas"]:
                    scenarios.append(
                        ScenarioConfig(
                            region=name,
                            transition=regions[name].transition,
                            tau=int(tau),
                            amount_mean=float(amount),
                            n=int(raw.get("n", 366)),
                            reps=reps,
                            grid_fraction=raw.get("grid_fraction"),
                            support_start=int(support[0]),
                            support_end=int(support[1]),
                            estimators=estimators,
                            root_seed=root_seed,
                            sigma_d=float(raw.get("sigma_d", 0.0075)),
                        )
                    )
    except (ValueError, SparseDelayError) as exc:
        _hard(f"{config_path}: {exc}")
    return scenarios


def _raw_table(results) -> str:
    rows = []
    for result in results:
        config = result.config
        for cell in result.cells:
            for rep, outcome in enumerate(cell.raw_outcomes):
                failed = isinstance(outcome, str)
                rows.append(
                    [
                        config.region,
                        cell.name,
                        config.tau,
                        f"{config.amount_mean:g}",
                        rep,
                        "" if failed else outcome,
                        outcome if failed else "ok",
                    ]
                )
    return _csv_text(
        ["region", "estimator", "tau", "lambda", "replicate", "lag", "status"], rows
    )


@main.command("bench")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--reps", type=int, default=None, help="Override the config's replicate count.")
@click.option("--seed", type=int, default=None, help="Override the config's root seed.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "markdown"]),
    default="csv",
    show_default=True,
)
@click.option("--raw", is_flag=True, help="Also emit one row per replicate.")
@click.option("--workers", type=int, default=None)
@click.option(
    "--out",
    type=click.Path(),
    default=None,
    help="Output base path; _mean_sd, _mse, _raw suffixes are appended.",
)
def cmd_bench(config_path, reps, seed, fmt, raw, workers, out):
    """Run the Monte Carlo scenarios described by CONFIG_PATH (JSON)."""
    scenarios = _bench_scenarios(config_path, reps, seed)
    try:
        workers = resolve_workers(workers)
    except ValueError as exc:
        _hard(str(exc))
    results = []
    for i, config in enumerate(scenarios, start=1):
        click.echo(
            f"[{i}/{len(scenarios)}] {config.region} tau={config.tau} "
            f"lambda={config.amount_mean:g} reps={config.reps}",
            err=True,
        )
        step = max(1, config.reps // 10)

        def progress(done, total):
            if done == total or done % step == 0:
                click.echo(f"  {done}/{total} replicates", err=True)

        result = run_scenario(config, workers=workers, progress=progress)
        for cell in result.cells:
            if cell.failure_count:
                kinds = ", ".join(f"{k}x{c}" for k, c in cell.failure_kinds)
                click.echo(
                    f"  note: {cell.name} failed {cell.failure_count}/{config.reps} ({kinds})",
                    err=True,
                )
        results.append(result)

    mean_sd = emit_table(results, fmt)
    mse = emit_table(results, fmt, value="mse")
    parameters = {
        "config": str(config_path),
        "format": fmt,
        "reps_override": reps,
        "seed_override": seed,
        "workers": workers,
        "raw": raw,
    }
    seeds = sorted({config.root_seed for config in scenarios})
    if out is None:
        click.echo("# mean (sd)")
        click.echo(mean_sd, nl=False)
        click.echo("# mse")
        click.echo(mse, nl=False)
        if raw:
            click.echo("# raw")
            click.echo(_raw_table(results), nl=False)
        return
    ext = "csv" if fmt == "csv" else "md"
    mean_path = f"{out}_mean_sd.{ext}"
    mse_path = f"{out}_mse.{ext}"
    Path(mean_path).write_text(mean_sd)
    Path(mse_path).write_text(mse)
    outputs = [mean_path, mse_path]
    if raw:
        raw_path = f"{out}_raw.csv"
        Path(raw_path).write_text(_raw_table(results))
        outputs.append(raw_path)
    write_manifest(out, "bench", parameters, seeds, outputs=outputs)
    click.echo(f"wrote {', '.join(outputs)}", err=True)


# ------------------------------------------------------------------ aggregate


@main.command("aggregate")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cmd_aggregate(input_path, alpha, out):
    """Aggregate estimate rows: median lag and robust sd of significant ones.

    INPUT_PATH is a file written by the estimate subcommand (or any CSV with
    lag_hat and p_value columns). Rows flagged failed are skipped and
    counted.
    """
    try:
        with open(input_path, newline="") as handle:
            lines = [l for l in handle if l.strip() and not l.lstrip().startswith("#")]
    except OSError as exc:
        _hard(str(exc))
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"lag_hat", "p_value"} <= set(reader.fieldnames):
        _hard(f"{input_path}: need lag_hat and p_value columns")
    results = []
    failed = 0
    for row in reader:
        status = (row.get("status") or "ok").strip()
        lag_text = (row.get("lag_hat") or "").strip()
        p_text = (row.get("p_value") or "").strip()
        if status != "ok" or not lag_text or not p_text:
            failed += 1
            continue
        try:
            results.append(
                SimpleNamespace(lag_hat=int(float(lag_text)), p_value=float(p_text))
            )
        except ValueError:
            failed += 1
    if not results:
        _hard(f"{input_path}: no usable rows")
    try:
        summary = aggregate_years(results, alpha)
    except ValueError as exc:
        _hard(str(exc))
    significant = sum(1 for r in results if r.p_value < alpha)
    text = _csv_text(
        [
            "n_results",
            "n_failed_rows",
            "n_significant",
            "significant_fraction",
            "median_lag",
            "robust_sd",
            "status",
        ],
        [
            [
                len(results),
                failed,
                significant,
                repr(summary.significant_fraction),
                "" if summary.median_lag is None else repr(summary.median_lag),
                "" if summary.robust_sd is None else repr(summary.robust_sd),
                "ok" if summary.has_estimate else "not_significant",
            ]
        ],
    )
    _deliver(
        text,
        out,
        "aggregate",
        {"input": str(input_path), "alpha": alpha},
    )


if __name__ == "__main__":
    main()
