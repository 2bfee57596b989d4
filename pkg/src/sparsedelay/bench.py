"""Monte Carlo harness: estimator accuracy over synthetic delay scenarios.

One scenario fixes a region's chain, a true delay, an amount scale, and a
replicate count. Every replicate simulates one pair and runs all configured
estimators on that same pair, so per-estimator columns are paired samples.
Replicates are seeded as (root_seed, index), which makes results identical
whether they run serially or fanned out across processes.
"""
from __future__ import annotations

import csv
import io
import os
import re
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .errors import TooShort
from .simulate import ImpulseSpec, TransitionMatrix, simulate_pair
from .tde import (
    ESTIMATOR_ORDER,
    ESTIMATORS,
    TdeResult,
    estimate_delay_batch,
    restrict_grid,
)

WORKERS_ENV = "SPARSEDELAY_WORKERS"

_PAPER_FRACTIONS = (0.4, 0.5, 1.0)


def _default_estimators() -> tuple:
    return tuple(ESTIMATORS[name] for name in ESTIMATOR_ORDER)


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark cell: who simulates, what delay, how noisy, how often."""

    region: str
    transition: TransitionMatrix
    tau: int
    amount_mean: float
    n: int = 366
    reps: int = 200
    grid_fraction: float | None = None
    support_start: int = 110
    support_end: int = 183
    estimators: tuple = field(default_factory=_default_estimators)
    root_seed: int = 0
    sigma_d: float = 0.0075
    keep_raw: bool = True

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.estimators:
            raise ValueError("need at least one estimator")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.grid_fraction is not None and not 0.0 < self.grid_fraction <= 1.0:
            raise ValueError("grid_fraction must lie in (0, 1]")
        # validates n / support compatibility up front
        self.impulse_spec()

    def impulse_spec(self) -> ImpulseSpec:
        return ImpulseSpec(
            self.tau, self.n, self.support_start, self.support_end, self.sigma_d
        )

    @property
    def effective_grid_fraction(self) -> float:
        """Configured fraction, or the smallest standard one that reaches tau."""
        if self.grid_fraction is not None:
            return self.grid_fraction
        for fraction in _PAPER_FRACTIONS:
            grid = restrict_grid(self.n, fraction)
            if abs(self.tau) <= grid.lags[-1]:
                return fraction
        return 1.0


@dataclass(frozen=True)
class EstimatorCell:
    """Aggregated accuracy of one estimator in one scenario."""

    name: str
    mean: float
    sd: float
    mse: float
    failure_count: int
    scored: int
    failure_kinds: tuple = ()
    # one entry per replicate, in replicate order: an integer lag, or the
    # failure's error class name
    raw_outcomes: tuple | None = None

    @property
    def raw_lags(self) -> tuple | None:
        if self.raw_outcomes is None:
            return None
        return tuple(o for o in self.raw_outcomes if not isinstance(o, str))


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    cells: tuple

    def cell(self, name: str) -> EstimatorCell:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(f"no estimator {name!r} in this scenario")


def mse_from_results(raw_lags, true_tau: float) -> float:
    """Mean squared deviation of estimated lags from the generating delay."""
    lags = np.asarray(raw_lags, dtype=float)
    if lags.size == 0:
        raise TooShort("no lags to score")
    return float(np.mean((lags - true_tau) ** 2))


def resolve_workers(workers=None) -> int:
    """Explicit argument, else the SPARSEDELAY_WORKERS variable, else serial."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        if not raw:
            return 1
        workers = int(raw)
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    return workers


def _replicate(config: ScenarioConfig, rep: int) -> list:
    """One replicate's outcome per estimator: a lag, or an error class name."""
    pair = simulate_pair(
        config.impulse_spec(),
        config.transition,
        config.amount_mean,
        [config.root_seed, rep],
    )
    grid = restrict_grid(config.n, config.effective_grid_fraction)
    outcomes = estimate_delay_batch(
        pair.x, pair.y, grid, config.estimators, collect_errors=True
    )
    return [
        r.lag_hat if isinstance(r, TdeResult) else type(r).__name__
        for r in outcomes
    ]


def run_scenario(config: ScenarioConfig, workers=None, progress=None) -> ScenarioResult:
    """Run all replicates and aggregate per-estimator moments.

    Failed replicates are excluded from the moments and tallied; a cell where
    everything failed carries nan moments. progress, if given, is called as
    progress(done, total) after each finished replicate.
    """
    workers = resolve_workers(workers)
    payloads: dict[int, list] = {}
    if workers == 1 or config.reps == 1:
        for rep in range(config.reps):
            payloads[rep] = _replicate(config, rep)
            if progress is not None:
                progress(rep + 1, config.reps)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_replicate, config, rep): rep
                for rep in range(config.reps)
            }
            done = 0
            for future in as_completed(futures):
                payloads[futures[future]] = future.result()
                done += 1
                if progress is not None:
                    progress(done, config.reps)

    cells = []
    for j, spec in enumerate(config.estimators):
        outcomes = [payloads[rep][j] for rep in range(config.reps)]
        lags = [o for o in outcomes if not isinstance(o, str)]
        fails = Counter(o for o in outcomes if isinstance(o, str))
        scored = len(lags)
        if scored:
            arr = np.asarray(lags, dtype=float)
            mean = float(arr.mean())
            sd = float(arr.std(ddof=1)) if scored > 1 else 0.0
            mse = mse_from_results(arr, config.tau)
        else:
            mean = sd = mse = float("nan")
        cells.append(
            EstimatorCell(
                spec.name,
                mean,
                sd,
                mse,
                int(sum(fails.values())),
                scored,
                tuple(sorted(fails.items())),
                tuple(outcomes) if config.keep_raw else None,
            )
        )
    return ScenarioResult(config, tuple(cells))


# ------------------------------------------------------------------ tables


def _column_label(tau: int, amount: float) -> str:
    return f"tau={tau}/lambda={amount:g}"


def _cell_text(cell: EstimatorCell, value: str, fmt: str) -> str:
    if value == "mean_sd":
        if fmt == "markdown":
            return f"{cell.mean:.3f} ({cell.sd:.3f})"
        return f"{cell.mean!r} ({cell.sd!r})"
    if value == "mse":
        if fmt == "markdown":
            return f"{cell.mse:.3f}"
        return repr(cell.mse)
    raise ValueError(f"unknown table value {value!r}")


def emit_table(results, fmt: str = "csv", value: str = "mean_sd") -> str:
    """Lay scenarios out as estimator rows by (tau, amount) columns.

    Regions stack as blocks in first-appearance order; within a block, rows
    follow the standard estimator ordering. CSV cells keep full float
    precision so parsing them recovers identical numbers; markdown shows 3
    decimals.
    """
    results = list(results)
    if not results:
        raise ValueError("no scenario results to tabulate")
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"unknown table format {fmt!r}")

    regions = []
    names = []
    for res in results:
        if res.config.region not in regions:
            regions.append(res.config.region)
        for cell in res.cells:
            if cell.name not in names:
                names.append(cell.name)
    known = [n for n in ESTIMATOR_ORDER if n in names]
    names = known + [n for n in names if n not in known]

    columns = sorted(
        {(res.config.tau, res.config.amount_mean) for res in results}
    )
    lookup = {}
    for res in results:
        for cell in res.cells:
            key = (res.config.region, cell.name, res.config.tau, res.config.amount_mean)
            lookup[key] = cell

    header = ["region", "estimator"] + [_column_label(t, a) for t, a in columns]
    rows = []
    for region in regions:
        for name in names:
            row = [region, name]
            for tau, amount in columns:
                cell = lookup.get((region, name, tau, amount))
                row.append("" if cell is None else _cell_text(cell, value, fmt))
            rows.append(row)

    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buffer.getvalue()

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    def md_row(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    lines = [md_row(header), "| " + " | ".join("-" * w for w in widths) + " |"]
    lines.extend(md_row(r) for r in rows)
    return "\n".join(lines) + "\n"


_CELL_RE = re.compile(r"^\s*([^\s(]+)\s*\(([^)]+)\)\s*$")


def parse_mean_sd(cell: str) -> tuple[float, float]:
    """Invert a "mean (sd)" table cell."""
    match = _CELL_RE.match(cell)
    if match is None:
        raise ValueError(f"not a mean (sd) cell: {cell!r}")
    return float(match.group(1)), float(match.group(2))
