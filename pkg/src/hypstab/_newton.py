"""Damped Newton iteration with a central-difference Jacobian."""
from __future__ import annotations

import numpy as np

from .errors import NewtonDivergence, NumericalFailure

FD_STEP = 1e-6
TOL = 1e-12
MAX_ITER = 50


def _norm(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def _safe(F, x):
    try:
        r = np.asarray(F(x), dtype=float)
    except (NumericalFailure, FloatingPointError, ZeroDivisionError, OverflowError, ValueError):
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def fd_jacobian(F, x, r0=None, h=FD_STEP):
    m = x.size
    J = None
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        rp = _safe(F, x + e)
        rm = _safe(F, x - e)
        if rp is None and rm is None:
            raise NewtonDivergence("Jacobian evaluation failed on both sides")
        if rp is None:
            col = (r0 - rm) / h
        elif rm is None:
            col = (rp - r0) / h
        else:
            col = (rp - rm) / (2 * h)
        if J is None:
            J = np.empty((col.size, m))
        J[:, j] = col
    return J


def newton(F, x0, tol=TOL, max_iter=MAX_ITER, what="system"):
    """Solve ``F(x) = 0``; returns x with ``max|F(x)| <= tol``.

    The step is halved until the residual decreases (at most 30 halvings).
    Raises NewtonDivergence with the last residual otherwise.
    """
    x = np.array(x0, dtype=float)
    r = _safe(F, x)
    if r is None:
        raise NewtonDivergence(f"{what}: residual undefined at initial guess")
    res = _norm(r)
    for _ in range(max_iter):
        if res <= tol:
            return x
        J = fd_jacobian(F, x, r)
        try:
            dx = np.linalg.solve(J, -r) if J.shape[0] == J.shape[1] else np.linalg.lstsq(J, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            raise NewtonDivergence(f"{what}: singular Jacobian", res) from None
        t = 1.0
        for _ in range(30):
            xn = x + t * dx
            rn = _safe(F, xn)
            if rn is not None and _norm(rn) < res:
                break
            t *= 0.5
        else:
            # no descent at machine resolution: accept if already near tolerance
            if res <= 100 * tol:
                return x
            raise NewtonDivergence(f"{what}: line search failed", res)
        x, r, res = xn, rn, _norm(rn)
    if res <= tol:
        return x
    raise NewtonDivergence(f"{what}: no convergence in {max_iter} iterations", res)
