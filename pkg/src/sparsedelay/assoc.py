"""Lagged association between two equal-length series.

For series x and y of length n and a lag l in {-(n-1), ..., n-1} the association
is the average product of scaled values over the overlap of the two windows:

    l >= 0:  gamma_l = (1/(n-l)) * sum_{k=1..n-l} M(x_k) * M(y_{k+l})
    l <  0:  gamma_l = (1/(n-|l|)) * sum_{k=1..n-|l|} M(x_{|l|+k}) * M(y_k)

with three choices of the scaling map M:

    unscaled   M(v) = v
    standard   M(v) = (v - mean) / sd, moments of the full series
    trimmed    M(v) = (v - mean_seg) / sd_seg, moments of the overlap segment

All standard deviations are population ones (divisor n, or the segment length).
A positive lag means y trails x: if y repeats x's pattern tau steps later, the
profile peaks near l = +tau.

The whole profile can be written through a sparse shift matrix S built from y,
whose column for lag l is y advanced by l and zero-padded: S[r, l + n - 1] =
y[r + l] where defined. Then S^T x equals the per-lag overlap cross products,
and dividing by the overlap lengths (the diagonal returned by
``weight_matrix_diagonal``) yields the unscaled profile. The same cross
products plus running segment sums give the other two scalings, which is how
``association_profile`` avoids the quadratic double loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import LagOutOfRange, TooShort, ZeroVariance

SCALINGS = ("unscaled", "standard", "trimmed")


def _as_series(v, name: str = "series") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size < 2:
        raise TooShort(f"{name} needs at least 2 observations, got {arr.size}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = _as_series(x, "x")
    ya = _as_series(y, "y")
    if xa.size != ya.size:
        raise ValueError(f"series lengths differ: {xa.size} vs {ya.size}")
    return xa, ya


def standardize(x) -> np.ndarray:
    """Center to mean 0 and scale to population sd 1.

    Raises ZeroVariance on a constant input.
    """
    arr = _as_series(x)
    sd = arr.std()
    if sd == 0.0:
        raise ZeroVariance("cannot standardize a constant series")
    return (arr - arr.mean()) / sd


@dataclass(frozen=True)
class LagGrid:
    """An increasing set of candidate lags for a series length n."""

    lags: np.ndarray
    n: int

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        object.__setattr__(self, "lags", lags)
        if lags.size == 0:
            raise ValueError("empty lag grid")
        if lags.size > 1 and not (np.diff(lags) > 0).all():
            raise ValueError("lags must be strictly increasing")
        if np.abs(lags).max() > self.n - 1:
            raise LagOutOfRange(
                f"grid holds lags beyond +/-{self.n - 1} for n={self.n}"
            )

    @classmethod
    def full(cls, n: int) -> "LagGrid":
        return cls(np.arange(-(n - 1), n), n)

    def __len__(self) -> int:
        return int(self.lags.size)


@dataclass(frozen=True)
class AssociationProfile:
    """Association values over a lag grid, for one scaling mode."""

    grid: LagGrid
    values: np.ndarray
    scaling: str


class ShiftMatrix:
    """Sparse n x (2n-1) matrix of zero-padded shifted copies of y.

    Column j corresponds to lag l = j - (n - 1) and holds y[r + l] at row r
    wherever 0 <= r + l < n, zero elsewhere. Stored in compressed column form;
    a dense copy is materialized lazily for BLAS-heavy consumers.
    """

    def __init__(self, y: np.ndarray):
        self.y = _as_series(y, "y")
        self.n = self.y.size
        n = self.n
        # column j holds the window y[max(0,l) : n+min(0,l)] starting at row max(0,-l)
        data = []
        indices = []
        indptr = np.zeros(2 * n, dtype=np.int64)
        for j in range(2 * n - 1):
            lag = j - (n - 1)
            window = self.y[max(0, lag): n + min(0, lag)]
            start_row = max(0, -lag)
            data.append(window)
            indices.append(np.arange(start_row, start_row + window.size))
            indptr[j + 1] = indptr[j] + window.size
        self._csc = sp.csc_array(
            (np.concatenate(data), np.concatenate(indices), indptr),
            shape=(n, 2 * n - 1),
        )
        self._dense: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self._csc.shape

    def column(self, lag: int) -> np.ndarray:
        """Dense copy of the column for one lag."""
        n = self.n
        if abs(lag) > n - 1:
            raise LagOutOfRange(f"|lag| must be <= {n - 1}, got {lag}")
        return self._csc[:, [lag + n - 1]].toarray().ravel()

    def cross_products(self, x: np.ndarray) -> np.ndarray:
        """S^T x: overlap cross products for every lag, length 2n-1."""
        return self._csc.T @ x

    def reconstruct(self, coef: np.ndarray) -> np.ndarray:
        """S @ coef: superpose shifted copies of y with the given weights."""
        return self._csc @ coef

    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._csc.toarray()
        return self._dense

    def toarray(self) -> np.ndarray:
        return self.dense().copy()


def build_shift_matrix(y) -> ShiftMatrix:
    """Build the shift matrix of zero-padded lagged copies of y."""
    return ShiftMatrix(np.asarray(y, dtype=float))


def weight_matrix_diagonal(n: int) -> np.ndarray:
    """Overlap lengths per lag: (1, 2, ..., n-1, n, n-1, ..., 2, 1)."""
    if n < 1:
        raise ValueError("n must be positive")
    up = np.arange(1, n + 1)
    return np.concatenate([up, up[-2::-1]])


def _windows(n: int, lag: int) -> tuple[slice, slice, int]:
    m = n - abs(lag)
    if lag >= 0:
        return slice(0, m), slice(lag, lag + m), m
    return slice(-lag, -lag + m), slice(0, m), m


def association_at_lag(x, y, lag: int, scaling: str = "unscaled") -> float:
    """Association of (x, y) at a single lag.

    Args:
        x, y: equal-length series.
        lag: integer in [-(n-1), n-1]; positive means y trails x.
        scaling: "unscaled", "standard" or "trimmed".

    Returns:
        The scaled average cross product over the overlap.

    Raises:
        LagOutOfRange: |lag| > n - 1.
        ZeroVariance: a required scale (global or segment) is zero.
    """
    xa, ya = _check_pair(x, y)
    n = xa.size
    if abs(lag) > n - 1:
        raise LagOutOfRange(f"|lag| must be <= {n - 1}, got {lag}")
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    sx, sy, m = _windows(n, lag)
    xw, yw = xa[sx], ya[sy]
    if scaling == "unscaled":
        return float(xw @ yw) / m
    if scaling == "standard":
        sdx, sdy = xa.std(), ya.std()
        if sdx == 0.0 or sdy == 0.0:
            raise ZeroVariance("standard scaling needs non-constant series")
        return float((xw - xa.mean()) @ (yw - ya.mean())) / (m * sdx * sdy)
    sdx, sdy = xw.std(), yw.std()
    if sdx == 0.0 or sdy == 0.0:
        raise ZeroVariance(f"constant overlap segment at lag {lag}")
    return float((xw - xw.mean()) @ (yw - yw.mean())) / (m * sdx * sdy)


def association_profile(
    x,
    y,
    grid: LagGrid | None = None,
    scaling: str = "unscaled",
    shift: ShiftMatrix | None = None,
) -> AssociationProfile:
    """Association over a whole lag grid in one pass.

    The overlap cross products come from a single shift-matrix product; segment
    sums for the centered scalings come from cumulative sums. Matches
    ``association_at_lag`` evaluated lag by lag to floating precision.

    Args:
        x, y: equal-length series.
        grid: lags to evaluate; defaults to the full grid.
        scaling: "unscaled", "standard" or "trimmed".
        shift: optional prebuilt ShiftMatrix of y, reused across calls.

    Returns:
        AssociationProfile with values aligned to grid.lags.
    """
    xa, ya = _check_pair(x, y)
    n = xa.size
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    if grid is None:
        grid = LagGrid.full(n)
    elif grid.n != n:
        raise ValueError(f"grid was built for n={grid.n}, series have n={n}")
    if shift is None:
        shift = ShiftMatrix(ya)
    elif shift.n != n or not np.array_equal(shift.y, ya):
        raise ValueError("shift matrix does not match y")

    lags = grid.lags
    cross = shift.cross_products(xa)[lags + n - 1]
    m = (n - np.abs(lags)).astype(float)

    if scaling == "unscaled":
        return AssociationProfile(grid, cross / m, scaling)

    # window boundaries, as indices into length-(n+1) cumulative sums
    ax = np.where(lags >= 0, 0, -lags)
    ay = np.where(lags >= 0, lags, 0)
    cum_x = np.concatenate([[0.0], np.cumsum(xa)])
    cum_y = np.concatenate([[0.0], np.cumsum(ya)])
    sum_x = cum_x[ax + m.astype(np.int64)] - cum_x[ax]
    sum_y = cum_y[ay + m.astype(np.int64)] - cum_y[ay]

    if scaling == "standard":
        sdx, sdy = xa.std(), ya.std()
        if sdx == 0.0 or sdy == 0.0:
            raise ZeroVariance("standard scaling needs non-constant series")
        mx, my = xa.mean(), ya.mean()
        vals = (cross - mx * sum_y - my * sum_x + m * mx * my) / (m * sdx * sdy)
        return AssociationProfile(grid, vals, scaling)

    cum_xx = np.concatenate([[0.0], np.cumsum(xa * xa)])
    cum_yy = np.concatenate([[0.0], np.cumsum(ya * ya)])
    sum_xx = cum_xx[ax + m.astype(np.int64)] - cum_xx[ax]
    sum_yy = cum_yy[ay + m.astype(np.int64)] - cum_yy[ay]
    mean_x, mean_y = sum_x / m, sum_y / m
    var_x = np.maximum(sum_xx / m - mean_x**2, 0.0)
    var_y = np.maximum(sum_yy / m - mean_y**2, 0.0)
    bad = (var_x == 0.0) | (var_y == 0.0)
    if bad.any():
        raise ZeroVariance(
            f"constant overlap segment at lag {int(lags[np.flatnonzero(bad)[0]])}"
        )
    vals = (cross / m - mean_x * mean_y) / np.sqrt(var_x * var_y)
    return AssociationProfile(grid, vals, scaling)
