"""Delay estimation between paired series, with significance and aggregation.

Seven named estimators are exposed. Three of them scan the lagged association
of the pair directly, one per scaling mode. The other four first reconstruct
the sparse series as a penalized superposition of shifted copies of the
second series, then scan the association between that reconstruction and the
second series; they differ in how the penalty is chosen (path quantile versus
cross-validation) and in the post-fit association scaling.

The estimate is the grid lag maximizing squared association. Significance is
a two-sided no-correlation test on the overlap segment at the chosen lag,
always computed from the original pair regardless of estimator family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .assoc import (
    LagGrid,
    ShiftMatrix,
    association_profile,
    _check_pair,
    _windows,
)
from .errors import (
    AllZeroReconstruction,
    SparseDelayError,
    DegenerateGrid,
    InsufficientOverlap,
    ZeroVariance,
)
from .lasso import (
    CrossValidation,
    QuantileOfPath,
    select_lambda,
    solution_path,
)

PEARSON = "pearson"
LASSO = "lasso"


@dataclass(frozen=True)
class EstimatorSpec:
    """Configuration of one named delay estimator."""

    name: str
    family: str
    scaling: str = "unscaled"
    lambda_rule: object = None
    cor_after: bool = False

    def __post_init__(self):
        if self.family not in (PEARSON, LASSO):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == PEARSON and self.lambda_rule is not None:
            raise ValueError("direct-scan estimators take no penalty rule")
        if self.family == LASSO:
            if self.lambda_rule is None:
                raise ValueError("reconstruction estimators need a penalty rule")
            want = "standard" if self.cor_after else "unscaled"
            if self.scaling != want:
                raise ValueError(
                    f"cor_after={self.cor_after} implies scaling {want!r}"
                )


def _registry() -> dict:
    quant = QuantileOfPath(0.1)
    # ten-fold rather than leave-one-out: selection quality is equivalent here
    # and the fold count is what keeps batch runs tractable
    cv = CrossValidation(folds=10)
    specs = [
        EstimatorSpec("pn", PEARSON, "unscaled"),
        EstimatorSpec("pn-trim", PEARSON, "trimmed"),
        EstimatorSpec("pn-standard", PEARSON, "standard"),
        EstimatorSpec("lasso-0.1", LASSO, "unscaled", quant, False),
        EstimatorSpec("lasso-cor-0.1", LASSO, "standard", quant, True),
        EstimatorSpec("lasso-cv", LASSO, "unscaled", cv, False),
        EstimatorSpec("lasso-cv-cor", LASSO, "standard", cv, True),
    ]
    return {s.name: s for s in specs}


ESTIMATORS = _registry()
ESTIMATOR_ORDER = tuple(ESTIMATORS)


@dataclass(frozen=True)
class TdeResult:
    """One delay estimate with its significance at the chosen lag."""

    lag_hat: int
    gamma_at_lag: float
    p_value: float
    overlap_length: int
    spec: EstimatorSpec
    degenerate_overlap: bool = False  # constant overlap segment; p forced to 1


@dataclass(frozen=True)
class AnnualSummary:
    """Robust aggregate of per-year estimates that pass the significance cut."""

    results: tuple
    alpha: float
    median_lag: float | None
    robust_sd: float | None
    significant_fraction: float

    @property
    def has_estimate(self) -> bool:
        return self.median_lag is not None


def restrict_grid(n: int, fraction: float) -> LagGrid:
    """Symmetric grid {-L, ..., L} covering the given fraction of all lags.

    L is fraction * (2n - 1) / 2 rounded half up, never beyond n - 1, so a
    fraction of 1 returns the full grid and 0.5 keeps the midpoint lag n // 2
    inside the searched range.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if fraction * (2 * n - 1) < 1.0:
        raise DegenerateGrid(
            f"fraction {fraction} of {2 * n - 1} lags rounds to an empty grid"
        )
    half_span = math.floor(fraction * (2 * n - 1) / 2.0 + 0.5)
    half_span = min(half_span, n - 1)
    return LagGrid(np.arange(-half_span, half_span + 1), n)


def best_lag(lags: np.ndarray, values: np.ndarray) -> int:
    """Lag maximizing squared association; ties prefer small |l|, then l < 0."""
    squared = values * values
    contenders = np.asarray(lags)[squared == squared.max()]
    order = np.lexsort((contenders > 0, np.abs(contenders)))
    return int(contenders[order[0]])


def no_correlation_pvalue(gamma: float, overlap_length: int) -> float:
    """Two-sided p-value for zero correlation on an overlap of m samples.

    Uses the t statistic r * sqrt((m-2)/(1-r^2)) with m-2 degrees of freedom;
    gamma is clamped to [-1, 1] and |r| = 1 returns 0 exactly.
    """
    m = int(overlap_length)
    if m < 3:
        raise InsufficientOverlap(f"need at least 3 overlap samples, got {m}")
    r = min(1.0, max(-1.0, float(gamma)))
    if abs(r) == 1.0:
        return 0.0
    df = m - 2
    t_sq = r * r * df / (1.0 - r * r)
    # two-sided tail of the t distribution via the regularized incomplete beta
    return float(special.betainc(0.5 * df, 0.5, df / (df + t_sq)))


def _significance(x, y, lag: int) -> tuple[float, int, bool]:
    """No-correlation p at one lag of the original pair.

    The test statistic is the plain correlation of the two overlap segments.
    A constant segment leaves the correlation undefined; that case reports
    p = 1 with a degeneracy flag instead of failing the whole estimate.
    """
    n = x.size
    sx, sy, m = _windows(n, lag)
    if m < 3:
        raise InsufficientOverlap(
            f"overlap of {m} at lag {lag} cannot support a significance test"
        )
    xw, yw = x[sx], y[sy]
    sdx, sdy = xw.std(), yw.std()
    if sdx == 0.0 or sdy == 0.0:
        return 1.0, m, True
    r = float((xw - xw.mean()) @ (yw - yw.mean())) / (m * sdx * sdy)
    return no_correlation_pvalue(r, m), m, False


def estimate_delay_batch(x, y, grid: LagGrid, specs, collect_errors: bool = False) -> list:
    """Run several estimators on one pair, sharing every reusable piece.

    The shift matrix, the penalty path, and the cross-validation scan are each
    computed at most once; all estimators see the identical pair. Results come
    back in the order of specs.

    With collect_errors, a domain failure (degenerate scan, non-convergent
    solve, all-zero reconstruction, too little overlap) is returned in that
    estimator's slot instead of raised, and a failed shared stage fails
    exactly the estimators depending on it.
    """
    xa, ya = _check_pair(x, y)
    n = xa.size
    if grid.n != n:
        raise ValueError(f"grid was built for n={grid.n}, series have n={n}")
    specs = list(specs)
    shift = ShiftMatrix(ya)

    profiles: dict[str, object] = {}
    for spec in specs:
        if spec.family == PEARSON and spec.scaling not in profiles:
            try:
                prof = association_profile(xa, ya, grid, spec.scaling, shift)
                profiles[spec.scaling] = prof.values
            except SparseDelayError as exc:
                if not collect_errors:
                    raise
                profiles[spec.scaling] = exc

    recons: dict[object, object] = {}
    lasso_specs = [s for s in specs if s.family == LASSO]
    shared_failure = None
    if lasso_specs:
        try:
            sdx, sdy = xa.std(), ya.std()
            if sdx == 0.0 or sdy == 0.0:
                raise ZeroVariance(
                    "penalized reconstruction needs non-constant series"
                )
            # dividing both series by their sds puts the solver on unit
            # scale; the argmax is invariant because the profile scales
            # uniformly
            xs = xa / sdx
            scaled_design = shift.dense() / sdy
            path = solution_path(scaled_design, xs)
        except SparseDelayError as exc:
            if not collect_errors:
                raise
            shared_failure = exc
        if shared_failure is None:
            for spec in lasso_specs:
                rule = spec.lambda_rule
                if rule in recons:
                    continue
                try:
                    lam = select_lambda(path, rule, scaled_design, xs)
                    coef = path.fit_at(lam).coefficients
                    if not np.any(coef):
                        raise AllZeroReconstruction(
                            f"penalty {lam:.6g} zeroed every coefficient"
                        )
                    # back to the original units of x: undo both sd divisions
                    recons[rule] = (sdx / sdy) * shift.reconstruct(coef)
                except SparseDelayError as exc:
                    if not collect_errors:
                        raise
                    recons[rule] = exc

    results = []
    for spec in specs:
        try:
            if spec.family == PEARSON:
                values = profiles[spec.scaling]
            elif shared_failure is not None:
                values = shared_failure
            else:
                values = recons[spec.lambda_rule]
                if not isinstance(values, SparseDelayError):
                    xt = values
                    if not np.any(xt):
                        raise AllZeroReconstruction(
                            "reconstruction is identically zero"
                        )
                    values = association_profile(
                        xt, ya, grid, spec.scaling, shift
                    ).values
            if isinstance(values, SparseDelayError):
                raise values
            lag = best_lag(grid.lags, values)
            gamma = float(values[np.searchsorted(grid.lags, lag)])
            p, m, degen = _significance(xa, ya, lag)
            results.append(TdeResult(lag, gamma, p, m, spec, degen))
        except SparseDelayError as exc:
            if not collect_errors:
                raise
            results.append(exc)
    return results


def estimate_delay(x, y, grid: LagGrid, spec: EstimatorSpec) -> TdeResult:
    """One estimator on one pair; see estimate_delay_batch."""
    return estimate_delay_batch(x, y, grid, [spec])[0]


def aggregate_years(results, alpha: float) -> AnnualSummary:
    """Median and robust sd of the lags that pass the significance cut.

    The robust sd is 1.4826 times the median absolute deviation from the
    median. With no survivors the summary carries no location estimate and a
    zero significant fraction.
    """
    results = tuple(results)
    if not results:
        raise ValueError("no results to aggregate")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    kept = [r.lag_hat for r in results if r.p_value < alpha]
    fraction = len(kept) / len(results)
    if not kept:
        return AnnualSummary(results, alpha, None, None, 0.0)
    lags = np.array(kept, dtype=float)
    med = float(np.median(lags))
    mad = float(np.median(np.abs(lags - med)))
    return AnnualSummary(results, alpha, med, 1.4826 * mad, fraction)
