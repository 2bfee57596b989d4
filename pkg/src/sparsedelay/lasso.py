"""L1-penalized reconstruction of one series from shifted copies of another.

The problem solved here, for a design matrix D (usually a ShiftMatrix) with
columns indexed by lag and a response x, is

    minimize_s  sum_i (x_i - (D s)_i)^2  +  lam * sum_j |s_j|

with the objective exactly as written: no 1/(2n) factor, so the gradient of
the smooth part is 2 (D^T D s - D^T x) and the zero vector is optimal for all
lam >= lambda_max = max_j |2 (D^T x)_j|.

Solutions come with a checked stationarity certificate: for every active
coordinate the gradient magnitude equals lam within kkt_tol, and for every
inactive one it does not exceed lam + kkt_tol. A fit that cannot be certified
raises NonConvergence rather than returning quietly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .assoc import ShiftMatrix
from .errors import EmptyPath, NonConvergence

PATH_LENGTH_DEFAULT = 100
LAMBDA_MIN_RATIO_DEFAULT = 1e-3
KKT_TOL_DEFAULT = 1e-6
MAX_SWEEPS_DEFAULT = 10_000
COORD_TOL_DEFAULT = 1e-9

# fold fits feed a selection rule, not a reported estimate, so they may run loose
CV_SWEEPS = 50
CV_TOL = 1e-5


def _dense_design(design) -> np.ndarray:
    if isinstance(design, ShiftMatrix):
        return design.dense()
    arr = np.asarray(design, dtype=float)
    if arr.ndim != 2:
        raise ValueError("design must be a ShiftMatrix or a 2-d array")
    return arr


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0); t must be nonnegative."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@dataclass(frozen=True)
class LassoProblem:
    """One penalized reconstruction instance."""

    design: object  # ShiftMatrix or dense matrix
    response: np.ndarray
    lam: float

    def __post_init__(self):
        resp = np.asarray(self.response, dtype=float)
        object.__setattr__(self, "response", resp)
        d = _dense_design(self.design)
        if resp.ndim != 1 or resp.size != d.shape[0]:
            raise ValueError(
                f"response length {resp.size} does not match design rows {d.shape[0]}"
            )
        if self.lam < 0:
            raise ValueError("penalty must be nonnegative")


@dataclass(frozen=True)
class LassoFit:
    """A certified solution at one penalty value."""

    coefficients: np.ndarray
    lam: float
    nonzero_count: int
    objective: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass(frozen=True)
class SolutionPath:
    """Fits at strictly decreasing penalties, largest (all-zero fit) first."""

    entries: tuple

    def __post_init__(self):
        if len(self.entries) == 0:
            raise EmptyPath("solution path has no entries")
        lams = np.array([lam for lam, _ in self.entries])
        if lams.size > 1 and not (np.diff(lams) < 0).all():
            raise ValueError("path lambdas must be strictly decreasing")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.entries])

    @property
    def fits(self) -> list:
        return [f for _, f in self.entries]

    def coefficient_matrix(self) -> np.ndarray:
        return np.vstack([f.coefficients for _, f in self.entries])

    def fit_at(self, lam: float) -> LassoFit:
        for path_lam, f in self.entries:
            if path_lam == lam:
                return f
        raise KeyError(f"no path entry at lambda={lam!r}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class QuantileOfPath:
    """Pick the lower empirical q-quantile of the path's penalty values."""

    q: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError("quantile must lie in (0, 1)")


class LeaveOneOut:
    """Marker: one fold per sample."""

    def __repr__(self):
        return "LeaveOneOut"

    def __eq__(self, other):
        return isinstance(other, LeaveOneOut)

    def __hash__(self):
        return hash(LeaveOneOut)


LEAVE_ONE_OUT = LeaveOneOut()


@dataclass(frozen=True)
class CrossValidation:
    """Pick the path penalty with the smallest mean held-out squared error."""

    folds: object = LEAVE_ONE_OUT

    def __post_init__(self):
        if not isinstance(self.folds, LeaveOneOut):
            if not isinstance(self.folds, (int, np.integer)) or self.folds < 2:
                raise ValueError("folds must be an integer >= 2 or LEAVE_ONE_OUT")


def lambda_max(design, response) -> float:
    """Smallest penalty at which the all-zero vector is optimal."""
    d = _dense_design(design)
    resp = np.asarray(response, dtype=float)
    return float(np.abs(2.0 * (d.T @ resp)).max())


def _kkt_gap(grad: np.ndarray, coef: np.ndarray, lam: float) -> float:
    """Worst stationarity violation of the factor-2 gradient."""
    active = coef != 0.0
    gap = 0.0
    if active.any():
        gap = float(np.abs(np.abs(grad[active]) - lam).max())
    inactive = np.abs(grad[~active]) - lam
    if inactive.size:
        gap = max(gap, max(0.0, float(inactive.max())))
    return gap


def _restricted_stationary(G, c, lam, s, q, max_iters=64):
    """Make s stationary on its own support, in place.

    Repeatedly solves G_AA s_A = c_A - (lam/2) sign(s_A) on the support A.
    A solution that flips a sign is only taken up to the first zero crossing;
    the crossed coordinate leaves the support and the solve repeats. At
    lam = 0 there is no sign condition, so any solution is accepted.
    """
    iters = 0
    while iters < max_iters:
        iters += 1
        members = np.flatnonzero(s != 0.0)
        if members.size == 0:
            q[:] = 0.0
            return iters
        signs = np.sign(s[members])
        sub = G[np.ix_(members, members)]
        rhs = c[members] - 0.5 * lam * signs
        solved = None
        try:
            candidate = np.linalg.solve(sub, rhs)
            resid = np.abs(sub @ candidate - rhs).max()
            if resid <= 1e-8 * max(1.0, np.abs(rhs).max()):
                solved = candidate
        except np.linalg.LinAlgError:
            pass
        if solved is None:
            # rank-deficient support: slide along a null direction of the
            # active columns (fitted values frozen, l1 term non-increasing)
            # until a coefficient reaches zero, then shed it
            eigvals, eigvecs = np.linalg.eigh(sub)
            if eigvals[0] > 1e-10 * max(eigvals[-1], 1e-30):
                solved = eigvecs @ ((eigvecs.T @ rhs) / eigvals)
            else:
                null = eigvecs[:, 0]
                if float(signs @ null) > 0.0:
                    null = -null
                opposing = signs * null < 0
                if not opposing.any():
                    return iters  # defensive; a nonzero null always opposes some sign
                with np.errstate(divide="ignore"):
                    reach = np.where(opposing, -s[members] / null, np.inf)
                t = float(reach.min())
                moved = s[members] + t * null
                moved[int(np.argmin(reach))] = 0.0
                moved[np.abs(moved) < 1e-15] = 0.0
                s[members] = moved
                _refresh_q(G, s, q)
                continue
        if lam == 0.0 or not (np.sign(solved) * signs < 0).any():
            s[members] = solved
            s[np.abs(s) < 1e-15] = 0.0
            _refresh_q(G, s, q)
            return iters
        old = s[members]
        step = solved - old
        with np.errstate(divide="ignore", invalid="ignore"):
            crossing = np.where(step * old < 0, old / (old - solved), np.inf)
        first = float(crossing.min())
        if not np.isfinite(first) or first >= 1.0:
            s[members] = solved  # safety; unreachable when a sign truly flips
        else:
            moved = old + first * step
            moved[np.argmin(crossing)] = 0.0
            moved[np.abs(moved) < 1e-15] = 0.0
            s[members] = moved
        _refresh_q(G, s, q)
    return iters


def _pivot_polish(G, c, lam, s, q, kkt_tol, max_pivots):
    """Active-set pivoting to a certified stationary point. Returns (work, ok).

    From a support-stationary point, the worst outside violator j enters with
    sign sigma = -sign(gradient_j) while the active coefficients move along
    -sigma * G_AA^{-1} G_{A,j}, which freezes the active gradients exactly.
    The step runs until j's own gradient reaches the penalty (Schur
    complement > 0) or until a coefficient crosses zero and leaves (always
    reached in the degenerate case where column j lies in the active span,
    since the objective decreases at the constant rate |gradient_j| - lam).
    Every pivot strictly decreases the objective, so supports cannot repeat.
    """
    work = _restricted_stationary(G, c, lam, s, q)
    for pivot in range(max_pivots):
        grad = 2.0 * (q - c)
        if _kkt_gap(grad, s, lam) <= 0.5 * kkt_tol:
            return work + pivot, True
        active = s != 0.0
        excess = np.abs(grad) - lam
        excess[active] = -np.inf
        j = int(np.argmax(excess))
        if excess[j] <= 0.25 * kkt_tol:
            # violations only on the active side; one more exact solve settles it
            work += _restricted_stationary(G, c, lam, s, q)
            grad = 2.0 * (q - c)
            return work + pivot, _kkt_gap(grad, s, lam) <= 0.5 * kkt_tol
        sigma = -1.0 if grad[j] > 0 else 1.0
        members = np.flatnonzero(active)
        if members.size == 0:
            gjj = G[j, j]
            if gjj <= 0.0:
                return work + pivot, False
            s[j] = soft_threshold(float(c[j]), 0.5 * lam) / gjj
            _refresh_q(G, s, q)
            work += _restricted_stationary(G, c, lam, s, q)
            continue
        coupling = G[members, j]
        sub = G[np.ix_(members, members)]
        try:
            w = np.linalg.solve(sub, coupling)
        except np.linalg.LinAlgError:
            w = np.linalg.lstsq(sub, coupling, rcond=None)[0]
        direction = -sigma * w
        schur = float(G[j, j] - coupling @ w)
        scale = max(float(G[j, j]), 1.0)
        t_stationary = (
            excess[j] / (2.0 * schur) if schur > 1e-12 * scale else np.inf
        )
        current = s[members]
        with np.errstate(divide="ignore", invalid="ignore"):
            crossing = np.where(current * direction < 0, -current / direction, np.inf)
        t_cross = float(crossing.min()) if crossing.size else np.inf
        t = min(t_stationary, t_cross)
        if not np.isfinite(t) or t <= 0.0:
            return work + pivot, False  # numerically stuck; caller falls back
        s[members] = current + t * direction
        s[j] = t * sigma
        if t_cross <= t_stationary:
            s[members[int(np.argmin(crossing))]] = 0.0
        s[np.abs(s) < 1e-15] = 0.0
        _refresh_q(G, s, q)
        work += _restricted_stationary(G, c, lam, s, q)
    return work + max_pivots, False


def _solve_engine(G, c, lam, s, q, kkt_tol, max_sweeps, coord_tol):
    """Drive s to a certified solution in place. Returns (work, certified).

    Short coordinate-descent bursts make cheap bulk progress and discover the
    rough support; the pivoting polish then finishes to certificate precision.
    Work is counted in sweep-equivalents against max_sweeps.
    """
    p = c.size
    used = 0
    while used < max_sweeps:
        grad = 2.0 * (q - c)
        active = s != 0.0
        violating = (np.abs(grad) > lam + 0.25 * kkt_tol) & ~active
        if not violating.any() and _kkt_gap(grad, s, lam) <= 0.5 * kkt_tol:
            return used, True
        idx = np.flatnonzero(active | violating)
        if idx.size == 0:
            return used, True
        budget = min(30, max_sweeps - used)
        used += _kernels.cd_subset(G, c, lam, s, q, idx, budget, coord_tol)
        work, certified = _pivot_polish(G, c, lam, s, q, kkt_tol, 4 * p + 32)
        used += max(1, work // 4)
        if certified:
            return used, True
    grad = 2.0 * ((G @ s) - c)
    return used, _kkt_gap(grad, s, lam) <= kkt_tol


def _refresh_q(G, s, q):
    active = s != 0.0
    if active.any():
        q[:] = G[:, active] @ s[active]
    else:
        q[:] = 0.0


# Cold starts far below lambda_max land straight in the slow, saturated-support
# regime; stepping the penalty down geometrically keeps every solve warm.
_HOMOTOPY_STEP = 0.7
_HOMOTOPY_TOL = 1e-4  # intermediate solves are scaffolding, not reported


def _solve_to(G, c, lam, s, q, kkt_tol, max_sweeps, coord_tol, lam_from=None):
    """Certified solve at lam, optionally warming down from lam_from."""
    used = 0
    if lam > 0.0 and lam_from is not None:
        cur = float(lam_from)
        while cur * _HOMOTOPY_STEP > lam and used < max_sweeps:
            cur *= _HOMOTOPY_STEP
            u, _ = _solve_engine(G, c, cur, s, q, _HOMOTOPY_TOL,
                                 max_sweeps - used, coord_tol)
            used += u
    u, certified = _solve_engine(G, c, lam, s, q, kkt_tol,
                                 max_sweeps - used, coord_tol)
    return used + u, certified


def _objective(dense, resp, coef, lam) -> float:
    resid = resp - dense @ coef
    return float(resid @ resid + lam * np.abs(coef).sum())


def _make_fit(dense, resp, coef, lam) -> LassoFit:
    return LassoFit(
        coefficients=coef,
        lam=float(lam),
        nonzero_count=int(np.count_nonzero(coef)),
        objective=_objective(dense, resp, coef, lam),
    )


def fit(
    problem: LassoProblem,
    warm_start: np.ndarray | None = None,
    kkt_tol: float = KKT_TOL_DEFAULT,
    max_sweeps: int = MAX_SWEEPS_DEFAULT,
    coord_tol: float = COORD_TOL_DEFAULT,
) -> LassoFit:
    """Solve one instance to a checked stationarity certificate.

    Args:
        problem: design, response and penalty.
        warm_start: optional initial coefficients (copied, not mutated).
        kkt_tol: certificate tolerance on the factor-2 gradient.
        max_sweeps: total coordinate-descent sweep budget.
        coord_tol: per-sweep largest-move stopping tolerance.

    Raises:
        NonConvergence: the sweep budget ran out before certification.
    """
    dense = _dense_design(problem.design)
    G = dense.T @ dense
    c = dense.T @ problem.response
    return _fit_gram(dense, problem.response, G, c, problem.lam,
                     warm_start, kkt_tol, max_sweeps, coord_tol)


def _fit_gram(dense, resp, G, c, lam, warm_start, kkt_tol, max_sweeps, coord_tol):
    p = c.size
    lam_from = None
    if warm_start is None:
        s = np.zeros(p)
        q = np.zeros(p)
        if lam > 0.0:
            lam_from = float(np.abs(2.0 * c).max())
    else:
        s = np.asarray(warm_start, dtype=float).copy()
        if s.shape != (p,):
            raise ValueError(f"warm start must have shape ({p},)")
        q = np.empty(p)
        _refresh_q(G, s, q)
    sweeps, certified = _solve_to(G, c, lam, s, q, kkt_tol, max_sweeps,
                                  coord_tol, lam_from)
    if not certified and warm_start is not None and lam > 0.0:
        # a poor warm point can trap the active set; restart cold with homotopy
        s[:] = 0.0
        q[:] = 0.0
        extra, certified = _solve_to(G, c, lam, s, q, kkt_tol, max_sweeps,
                                     coord_tol, float(np.abs(2.0 * c).max()))
        sweeps += extra
    if not certified:
        raise NonConvergence(
            f"no certificate after {sweeps} sweeps at lambda={lam:.6g}"
        )
    s[s == 0.0] = 0.0  # normalize -0.0
    return _make_fit(dense, resp, s, lam)


def solution_path(
    design,
    response,
    path_length: int = PATH_LENGTH_DEFAULT,
    lambda_min_ratio: float = LAMBDA_MIN_RATIO_DEFAULT,
    kkt_tol: float = KKT_TOL_DEFAULT,
    max_sweeps: int = MAX_SWEEPS_DEFAULT,
) -> SolutionPath:
    """Fits along a log-spaced penalty grid, warm-started high to low.

    The grid runs from lambda_max down to lambda_max * lambda_min_ratio. The
    first entry is the exact all-zero fit. A zero response (lambda_max = 0)
    degenerates to the single entry at penalty 0.

    Raises:
        NonConvergence: tagged with the offending penalty.
    """
    if path_length < 2:
        raise ValueError("path_length must be at least 2")
    if not 0.0 < lambda_min_ratio < 1.0:
        raise ValueError("lambda_min_ratio must lie in (0, 1)")
    dense = _dense_design(design)
    resp = np.asarray(response, dtype=float)
    G = dense.T @ dense
    c = dense.T @ resp
    lmax = float(np.abs(2.0 * c).max())
    p = c.size

    if lmax == 0.0:
        zero = _make_fit(dense, resp, np.zeros(p), 0.0)
        return SolutionPath(((0.0, zero),))

    lambdas = np.geomspace(lmax, lmax * lambda_min_ratio, path_length)
    entries = [(float(lmax), _make_fit(dense, resp, np.zeros(p), lmax))]
    s = np.zeros(p)
    q = np.zeros(p)
    prev = lmax
    for lam in lambdas[1:]:
        # lam_from subdivides the jump on coarse grids; dense grids step directly
        sweeps, certified = _solve_to(G, c, float(lam), s, q, kkt_tol,
                                      max_sweeps, COORD_TOL_DEFAULT, lam_from=prev)
        if not certified:
            raise NonConvergence(
                f"no certificate after {sweeps} sweeps at lambda={lam:.6g}"
            )
        coef = s.copy()
        coef[coef == 0.0] = 0.0
        entries.append((float(lam), _make_fit(dense, resp, coef, float(lam))))
        prev = float(lam)
    return SolutionPath(tuple(entries))


def select_lambda(path: SolutionPath, rule, design=None, response=None) -> float:
    """Pick one penalty from a path by quantile rank or cross-validation.

    Quantile: sort the path's penalties ascending and take rank
    ceil(q * len); q = 0.1 lands near the small-penalty end.

    Cross-validation: contiguous folds (or each single sample for
    LEAVE_ONE_OUT); each fold refits the whole path on the remaining rows,
    warm-started from the full-data coefficients, and scores squared error on
    the held-out rows. The penalty with the smallest mean error wins; ties go
    to the larger penalty.
    """
    if len(path) == 0:  # defensive; SolutionPath forbids this
        raise EmptyPath("cannot select from an empty path")
    if isinstance(rule, QuantileOfPath):
        lams = np.sort(path.lambdas)  # ascending
        rank = int(np.ceil(rule.q * lams.size))
        return float(lams[max(rank, 1) - 1])
    if isinstance(rule, CrossValidation):
        if design is None or response is None:
            raise ValueError("cross-validation needs the design and response")
        errs = cv_errors(path, design, response, rule.folds)
        return float(path.lambdas[int(np.argmin(errs))])
    raise TypeError(f"unknown selection rule {rule!r}")


def cv_errors(path: SolutionPath, design, response, folds=LEAVE_ONE_OUT) -> np.ndarray:
    """Mean held-out squared error at every path penalty.

    Folds are contiguous index blocks covering every row exactly once, so the
    sum of fold errors divided by n is the mean per-sample error. Fold Grams
    come from rank-k downdates of the full Gram.
    """
    dense = _dense_design(design)
    resp = np.asarray(response, dtype=float)
    n = resp.size
    n_folds = n if isinstance(folds, LeaveOneOut) else int(folds)
    if not 2 <= n_folds <= n:
        raise ValueError(f"folds must lie in [2, {n}]")
    G = dense.T @ dense
    c = dense.T @ resp
    lambdas = path.lambdas
    warm = path.coefficient_matrix()
    bounds = np.linspace(0, n, n_folds + 1).astype(np.int64)
    total = np.zeros(lambdas.size)
    for f in range(n_folds):
        held = np.arange(bounds[f], bounds[f + 1])
        if held.size == 0:
            continue
        rows = np.ascontiguousarray(dense[held])
        G_fold = G - rows.T @ rows
        c_fold = c - rows.T @ resp[held]
        total += _kernels.fold_path_errors(
            G_fold, c_fold, lambdas, warm, rows, resp[held], CV_SWEEPS, CV_TOL
        )
    return total / n


def sparse_reconstruct(design, fit_result: LassoFit) -> np.ndarray:
    """D @ coefficients: the penalized reconstruction of the response."""
    if isinstance(design, ShiftMatrix):
        return design.reconstruct(fit_result.coefficients)
    dense = _dense_design(design)
    return dense @ fit_result.coefficients
