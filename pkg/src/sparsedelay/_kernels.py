"""Compiled inner loops for the penalized least-squares solver.

Everything here works on the Gram form of the problem: G = D^T D and
c = D^T x for a dense design D, so one coordinate update touches only G. The
running vector q = G s is maintained incrementally; a single coordinate move
costs one row of G. Row access G[j] is contiguous, and G is symmetric, so
rows stand in for columns.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def cd_subset(G, c, lam, s, q, idx, max_sweeps, tol):
    """Cyclic coordinate descent restricted to the coordinates in idx.

    Updates s and q in place. Returns the number of sweeps executed; stops
    early once the largest coordinate move in a sweep is at most tol.
    """
    half = 0.5 * lam
    p = c.shape[0]
    for sweep in range(max_sweeps):
        max_move = 0.0
        for t in range(idx.shape[0]):
            j = idx[t]
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            sj = s[j]
            rho = c[j] - q[j] + gjj * sj
            if rho > half:
                new = (rho - half) / gjj
            elif rho < -half:
                new = (rho + half) / gjj
            else:
                new = 0.0
            d = new - sj
            if d != 0.0:
                s[j] = new
                Gj = G[j]
                for k in range(p):
                    q[k] += Gj[k] * d
                if abs(d) > max_move:
                    max_move = abs(d)
        if max_move <= tol:
            return sweep + 1
    return max_sweeps


@njit(cache=True)
def fold_path_errors(Gf, cf, lambdas, warm, held_rows, held_resp, max_sweeps, tol):
    """Held-out squared error of one CV fold at every path lambda.

    Gf, cf: Gram and cross products with the held-out rows removed.
    warm[i]: full-data coefficients at lambdas[i], used as starting points.
    held_rows: dense design rows of the held-out samples.

    Fold fits are internal to the selection rule, so they run at a looser
    tolerance than certificate-bearing fits; sweeps stop on coordinate moves
    <= tol or at max_sweeps, whichever is first.
    """
    p = cf.shape[0]
    n_lam = lambdas.shape[0]
    errs = np.zeros(n_lam)
    s = np.zeros(p)
    q = np.zeros(p)
    for i in range(n_lam):
        lam = lambdas[i]
        for j in range(p):
            s[j] = warm[i, j]
        q[:] = 0.0
        for j in range(p):
            sj = s[j]
            if sj != 0.0:
                Gj = Gf[j]
                for k in range(p):
                    q[k] += Gj[k] * sj
        half = 0.5 * lam
        for sweep in range(max_sweeps):
            max_move = 0.0
            for j in range(p):
                gjj = Gf[j, j]
                if gjj <= 0.0:
                    continue
                sj = s[j]
                if sj == 0.0:
                    # cheap screen: stays at zero unless the gradient escapes the dead zone
                    rho = cf[j] - q[j]
                    if -half <= rho <= half:
                        continue
                else:
                    rho = cf[j] - q[j] + gjj * sj
                if rho > half:
                    new = (rho - half) / gjj
                elif rho < -half:
                    new = (rho + half) / gjj
                else:
                    new = 0.0
                d = new - sj
                if d != 0.0:
                    s[j] = new
                    Gj = Gf[j]
                    for k in range(p):
                        q[k] += Gj[k] * d
                    if abs(d) > max_move:
                        max_move = abs(d)
            if max_move <= tol:
                break
        e = 0.0
        for r in range(held_rows.shape[0]):
            pred = 0.0
            for j in range(p):
                if s[j] != 0.0:
                    pred += held_rows[r, j] * s[j]
            d = held_resp[r] - pred
            e += d * d
        errs[i] = e
    return errs


def warm_up():
    """Trigger JIT compilation on toy inputs so timing-sensitive callers pay nothing."""
    eye = np.eye(2)
    cd_subset(eye, np.zeros(2), 1.0, np.zeros(2), np.zeros(2),
              np.arange(2, dtype=np.int64), 2, 1e-9)
    fold_path_errors(eye, np.zeros(2), np.ones(1), np.zeros((1, 2)),
                     np.zeros((1, 2)), np.zeros(1), 2, 1e-9)
