"""Lax curves, Hugoniot curves and Riemann problem solvers.

Families are 0-based.  For a GNL family the Lax curve ``psi_i`` follows the
rarefaction curve for ``sigma >= 0`` and the shock curve for ``sigma < 0``;
both are parametrized so that ``lambda_i`` moves by ``k_i * sigma``.  LD
families use the integral curve (which coincides with the Hugoniot locus)
parametrized by arc length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._newton import newton
from .errors import BadParameter, NewtonDivergence, NumericalFailure, OutOfDomain
from .flux_models import FluxModel, _sorted_eigvals, eigen_at

RK_STEP = 1e-3
PRUNE = 1e-14
NONPHYSICAL = -1

SHOCK = "shock"
RAREFACTION = "rarefaction"
CONTACT = "contact"

# 8-point Gauss-Legendre on [0, 1] for the averaged Jacobian
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _check_family(model, i):
    if not 0 <= i < model.n:
        raise BadParameter(f"family {i} out of range for n={model.n}")


# ---------------------------------------------------------------------------
# single-family curves


def _rarefaction(model, i, sigma, u):
    if sigma == 0.0:
        return u.copy()
    if model.rarefaction_fn is not None:
        return np.asarray(model.rarefaction_fn(i, sigma, u), dtype=float)
    steps = max(1, math.ceil(abs(sigma) / RK_STEP))
    h = sigma / steps

    def r(w):
        return eigen_at(model, w, check=False).right_vecs[i]

    w = u.copy()
    for _ in range(steps):
        k1 = r(w)
        k2 = r(w + 0.5 * h * k1)
        k3 = r(w + 0.5 * h * k2)
        k4 = r(w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(w)):
        raise OutOfDomain("rarefaction curve left the hyperbolic region")
    return w


def rarefaction_point(model: FluxModel, i: int, sigma: float, u_minus) -> np.ndarray:
    """``R_i(sigma)(u_minus)``: the integral curve of ``r_i``.

    Negative ``sigma`` is accepted (it follows the same integral curve
    backwards); the Lax curve only uses it for LD families.
    """
    _check_family(model, i)
    u = model.as_state(u_minus)
    model.check_domain(u)
    out = _rarefaction(model, i, float(sigma), u)
    model.check_domain(out)
    return out


def _averaged_jacobian(model, a, b):
    d = b - a
    return sum(w * np.asarray(model.jacobian(a + x * d), dtype=float) for x, w in zip(_GL_X, _GL_W))


def _generic_shock(model, i, sigma, u):
    n = model.n
    ed = eigen_at(model, u, check=False)
    lam0 = ed.lambdas[i]
    l0 = ed.left_vecs[i]
    target = model.k[i] * sigma

    def F(z):
        tau, w, s = z[0], z[1:n + 1], z[n + 1]
        up = u + tau * w
        A = _averaged_jacobian(model, u, up)
        lam = _sorted_eigvals(np.asarray(model.jacobian(up), dtype=float))[i]
        return np.concatenate([A @ w - s * w, [l0 @ w - 1.0, lam - lam0 - target]])

    def solve(sig, guess):
        nonlocal target
        target = model.k[i] * sig
        return newton(F, guess, what=f"shock curve family {i}")

    guess = np.concatenate([[sigma], ed.right_vecs[i], [lam0 + 0.5 * target]])
    try:
        z = solve(sigma, guess)
    except NewtonDivergence:
        # parameter continuation from the base state
        z = np.concatenate([[0.0], ed.right_vecs[i], [lam0]])
        for m in range(1, 11):
            sig = sigma * m / 10
            z = solve(sig, z + np.concatenate([[sigma / 10], np.zeros(n + 1)]))
    tau, w, s = z[0], z[1:n + 1], z[n + 1]
    return u + tau * w, float(s)


def _shock(model, i, sigma, u):
    if model.shock_fn is not None:
        st, s = model.shock_fn(i, sigma, u)
        return np.asarray(st, dtype=float), float(s)
    if sigma == 0.0:
        return u.copy(), float(eigen_at(model, u, check=False).lambdas[i])
    if not model.gnl[i]:
        # LD: the Hugoniot locus is the integral curve, speed is constant along it
        return _rarefaction(model, i, sigma, u), float(eigen_at(model, u, check=False).lambdas[i])
    return _generic_shock(model, i, sigma, u)


def shock_point(model: FluxModel, i: int, sigma: float, u_minus):
    """``S_i(sigma)(u_minus)`` and the Rankine-Hugoniot speed."""
    _check_family(model, i)
    u = model.as_state(u_minus)
    model.check_domain(u)
    sigma = float(sigma)
    if sigma == 0.0:
        return u.copy(), float(eigen_at(model, u).lambdas[i])
    out, s = _shock(model, i, sigma, u)
    model.check_domain(out)
    return out, s


def _lax(model, i, sigma, u):
    if model.gnl[i] and sigma < 0:
        return _shock(model, i, sigma, u)[0]
    return _rarefaction(model, i, sigma, u)


def lax_point(model: FluxModel, i: int, sigma: float, u_minus) -> np.ndarray:
    _check_family(model, i)
    u = model.as_state(u_minus)
    model.check_domain(u)
    out = _lax(model, i, float(sigma), u)
    model.check_domain(out)
    return out


# ---------------------------------------------------------------------------
# composed maps and their inverses


def _psi(model, sigmas, u):
    w = u
    for i in range(model.n):
        w = _lax(model, i, float(sigmas[i]), w)
    return w


def _big_s(model, q, u):
    w = u
    for i in range(model.n):
        if q[i] != 0.0:
            w = _shock(model, i, float(q[i]), w)[0]
    return w


def _compose(model, step, sigmas, u_minus):
    sigmas = np.asarray(sigmas, dtype=float).reshape(model.n)
    w = model.as_state(u_minus)
    model.check_domain(w)
    for i in range(model.n):
        w = step(model, i, float(sigmas[i]), w)
        model.check_domain(w)
    return w


def psi_compose(model: FluxModel, sigmas, u_minus) -> np.ndarray:
    """``Psi(sigma)(u_minus) = psi_n(sigma_n) o ... o psi_1(sigma_1)(u_minus)``."""
    return _compose(model, _lax, sigmas, u_minus)


def shock_compose(model: FluxModel, q, u_minus) -> np.ndarray:
    """``S(q)(u_minus) = S_n(q_n) o ... o S_1(q_1)(u_minus)``."""
    return _compose(model, lambda m, i, s, w: _shock(m, i, s, w)[0] if s != 0.0 else w, q, u_minus)


def _invert(model, forward, um, up, what):
    """Newton on ``forward(x, um) = up`` with segment continuation fallback."""
    guess = eigen_at(model, um, check=False).left_vecs @ (up - um)

    def solve(target, x0):
        return newton(lambda x: forward(model, x, um) - target, x0, what=what)

    try:
        return solve(up, guess)
    except NumericalFailure:
        pass
    # continuation along the segment um -> up, halving the step on failure
    t, x, dt = 0.0, np.zeros(model.n), 0.125
    while t < 1.0:
        tn = min(1.0, t + dt)
        target = um + tn * (up - um)
        x0 = x + (tn - t) * guess
        try:
            x = solve(target, x0)
            t = tn
            dt = min(0.25, 2 * dt)
        except NumericalFailure:
            dt *= 0.5
            if dt < 1e-6:
                raise NewtonDivergence(f"{what}: continuation stalled at t={t:.3g}") from None
    return x


@lru_cache(maxsize=200_000)
def _strengths_cached(model, um, up, shocks):
    um = np.array(um)
    up = np.array(up)
    if np.array_equal(um, up):
        return np.zeros(model.n)
    if shocks:
        return _invert(model, _big_s, um, up, "shock strengths")
    return _invert(model, _psi, um, up, "wave strengths")


def _prepare(model, u_minus, u_plus):
    um = model.as_state(u_minus)
    up = model.as_state(u_plus)
    model.check_domain(um)
    model.check_domain(up)
    return tuple(um.tolist()), tuple(up.tolist())


def solve_strengths(model: FluxModel, u_minus, u_plus) -> np.ndarray:
    """The map E: wave strengths of the Riemann problem ``(u_minus, u_plus)``."""
    um, up = _prepare(model, u_minus, u_plus)
    return _strengths_cached(model, um, up, False).copy()


def solve_shock_strengths(model: FluxModel, u_minus, u_plus) -> np.ndarray:
    """The map q: ``u_plus = S(q)(u_minus)``."""
    um, up = _prepare(model, u_minus, u_plus)
    return _strengths_cached(model, um, up, True).copy()


def clear_caches():
    _strengths_cached.cache_clear()


# ---------------------------------------------------------------------------
# discretized Riemann fan


@dataclass
class Wave:
    family: int
    strength: float
    kind: str
    left: np.ndarray
    right: np.ndarray
    speed: float
    speed_range: tuple = None

    def to_json(self):
        return {"family": self.family, "strength": self.strength, "kind": self.kind,
                "left": self.left.tolist(), "right": self.right.tolist(), "speed": self.speed,
                "speed_range": list(self.speed_range) if self.speed_range else None}


@dataclass
class Fan:
    waves: list = field(default_factory=list)

    def __len__(self):
        return len(self.waves)

    @property
    def speeds(self):
        return [w.speed for w in self.waves]

    def to_json(self):
        return {"waves": [w.to_json() for w in self.waves]}


def fan_from_strengths(model, um, up, sigmas, eps, unsplit_families=()):
    """Fan for known strengths; the last right state is snapped to ``up``."""
    waves = []
    w = um
    nonzero = [i for i in range(model.n) if abs(sigmas[i]) > PRUNE]
    for i in nonzero:
        sig = float(sigmas[i])
        if model.gnl[i] and sig > 0:
            pieces = 1 if i in unsplit_families else max(1, math.ceil(sig / eps - 1e-9))
            lam_left = float(eigen_at(model, w, check=False).lambdas[i])
            for _ in range(pieces):
                wr = _rarefaction(model, i, sig / pieces, w)
                lam_right = float(eigen_at(model, wr, check=False).lambdas[i])
                waves.append(Wave(i, sig / pieces, RAREFACTION, w, wr, lam_right, (lam_left, lam_right)))
                w, lam_left = wr, lam_right
        elif model.gnl[i]:
            wr, s = _shock(model, i, sig, w)
            waves.append(Wave(i, sig, SHOCK, w, wr, s))
            w = wr
        else:
            wr = _rarefaction(model, i, sig, w)
            waves.append(Wave(i, sig, CONTACT, w, wr, float(eigen_at(model, w, check=False).lambdas[i])))
            w = wr
    if waves:
        waves[-1].right = up.copy()
    return Fan(waves)


def riemann_fan(model: FluxModel, u_minus, u_plus, eps: float, unsplit_families=()) -> Fan:
    """Front-tracking fan: shocks and contacts as single fronts, rarefactions
    split into ``ceil(sigma/eps)`` equal pieces moving at their right-state speed.

    Families listed in ``unsplit_families`` keep their rarefaction as a single
    front (used at interactions, where an incoming rarefaction is not re-split).
    """
    if not eps > 0:
        raise BadParameter("eps must be positive")
    um = model.as_state(u_minus)
    up = model.as_state(u_plus)
    sig = solve_strengths(model, um, up)
    return fan_from_strengths(model, um, up, sig, eps, unsplit_families)
