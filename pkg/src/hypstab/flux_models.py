"""Conservation-law systems: flux, eigenstructure and built-in models.

A model is strictly hyperbolic on a ball ``|u - center| <= domain_radius``.
Right eigenvectors of genuinely nonlinear (GNL) families are scaled so that
``grad(lambda_i) . r_i = k_i``; linearly degenerate (LD) families use unit
vectors (arc-length parametrization).  Left eigenvectors are the dual basis.

Built-in models carry closed-form eigenstructure and closed-form Lax curves.
``FluxModel.with_generic()`` strips them, forcing the numerical route
(LAPACK eigen-decomposition, RK4 rarefactions, Newton shocks) so the two can
be checked against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.stats import qmc

from .errors import BadParameter, NonHyperbolic, OutOfDomain

GNL = "GNL"
LD = "LD"

EIGEN_GAP_TOL = 1e-12


@dataclass(frozen=True)
class EigenData:
    """Eigenvalues and normalized eigenvectors at one state.

    ``right_vecs[i]`` is r_i and ``left_vecs[i]`` is l_i, so that
    ``left_vecs @ right_vecs.T`` is the identity.
    """

    lambdas: np.ndarray
    right_vecs: np.ndarray
    left_vecs: np.ndarray


@dataclass(frozen=True, eq=False)
class FluxModel:
    name: str
    n: int
    flux: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    field_kind: tuple
    k: tuple
    domain_radius: float = 0.5
    center: tuple = None
    params: Mapping = field(default_factory=dict)
    # closed-form hooks; None selects the numerical route
    eigen_fn: Optional[Callable] = None
    rarefaction_fn: Optional[Callable] = None
    shock_fn: Optional[Callable] = None
    left_batch_fn: Optional[Callable] = None  # states (m, n) -> left vectors (m, n, n)

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.n)
        if len(self.field_kind) != self.n or len(self.k) != self.n:
            raise BadParameter("field_kind and k need one entry per family")
        if any(kind not in (GNL, LD) for kind in self.field_kind):
            raise BadParameter(f"unknown field kind in {self.field_kind}")
        if any(kj <= 0 for kj in self.k):
            raise BadParameter("normalization constants k_j must be positive")
        if self.domain_radius <= 0:
            raise BadParameter("domain_radius must be positive")

    @cached_property
    def origin(self) -> np.ndarray:
        """The base state: value of every L1 function far away."""
        out = np.asarray(self.center, dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def gnl(self) -> tuple:
        return tuple(kind == GNL for kind in self.field_kind)

    @cached_property
    def _reference_vectors(self) -> np.ndarray:
        # orientation reference for generic LD eigenvectors
        return _raw_eigen(self, self.origin)[1]

    @cached_property
    def max_speed(self) -> float:
        """Largest characteristic speed over a deterministic domain sample."""
        return max(float(np.max(eigen_at(self, u).lambdas)) for u in domain_samples(self, 256))

    def in_domain(self, u) -> bool:
        d = np.asarray(u, dtype=float) - self.origin
        return float(np.sqrt(d @ d)) <= self.domain_radius * (1 + 1e-12)

    def check_domain(self, u) -> None:
        if not self.in_domain(u):
            raise OutOfDomain(f"state {np.asarray(u).tolist()} outside ball of radius "
                              f"{self.domain_radius} around {list(self.center)}")

    def with_generic(self) -> "FluxModel":
        """Same system with every closed-form hook removed."""
        return replace(self, name=self.name + "/generic", eigen_fn=None,
                       rarefaction_fn=None, shock_fn=None, left_batch_fn=None)

    def as_state(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float).reshape(self.n)


def eigen_at(model: FluxModel, u, check: bool = True) -> EigenData:
    """Eigenstructure at ``u``; ``check=False`` skips the domain test (solver iterates)."""
    u = model.as_state(u)
    if check:
        model.check_domain(u)
    if model.eigen_fn is not None:
        lam, R, L = model.eigen_fn(u)
        return EigenData(lam, R, L)
    return _generic_eigen(model, u)


def left_vectors_many(model: FluxModel, states) -> np.ndarray:
    """Left eigenvectors at many states, shape (m, n, n); checks the domain."""
    states = np.asarray(states, dtype=float).reshape(-1, model.n)
    d = np.linalg.norm(states - model.origin, axis=1)
    if np.any(d > model.domain_radius * (1 + 1e-12)):
        raise OutOfDomain("state outside the domain ball")
    if model.left_batch_fn is not None:
        return model.left_batch_fn(states)
    return np.array([eigen_at(model, u, check=False).left_vecs for u in states]).reshape(-1, model.n, model.n)


def _sorted_eigvals(J: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvals(J)
    if np.any(np.abs(w.imag) > EIGEN_GAP_TOL * max(1.0, float(np.max(np.abs(w.real))))):
        raise NonHyperbolic(f"complex eigenvalues {w}")
    return np.sort(w.real)


def _raw_eigen(model: FluxModel, u: np.ndarray):
    J = np.asarray(model.jacobian(u), dtype=float).reshape(model.n, model.n)
    w, V = np.linalg.eig(J)
    if np.any(np.abs(w.imag) > EIGEN_GAP_TOL * max(1.0, float(np.max(np.abs(w.real))))):
        raise NonHyperbolic(f"complex eigenvalues {w} at {u}")
    order = np.argsort(w.real)
    lam = w.real[order]
    if model.n > 1 and np.min(np.diff(lam)) <= EIGEN_GAP_TOL:
        raise NonHyperbolic(f"coincident eigenvalues {lam} at {u}")
    R = np.array(V.real[:, order].T)
    for i in range(model.n):
        R[i] /= np.linalg.norm(R[i])
        if R[i][np.argmax(np.abs(R[i]))] < 0:
            R[i] = -R[i]
    return lam, R


def gradient_lambda(model: FluxModel, u, i: int, h: float = None) -> np.ndarray:
    """Central-difference gradient of the i-th eigenvalue."""
    u = model.as_state(u)
    if h is None:
        h = 1e-5 * max(1.0, float(np.linalg.norm(u)))
    grad = np.empty(model.n)
    for m in range(model.n):
        e = np.zeros(model.n)
        e[m] = h
        if model.eigen_fn is not None:
            lp = model.eigen_fn(u + e)[0][i]
            lm = model.eigen_fn(u - e)[0][i]
        else:
            lp = _sorted_eigvals(np.asarray(model.jacobian(u + e), dtype=float))[i]
            lm = _sorted_eigvals(np.asarray(model.jacobian(u - e), dtype=float))[i]
        grad[m] = (lp - lm) / (2 * h)
    return grad


def _generic_eigen(model: FluxModel, u: np.ndarray) -> EigenData:
    lam, R = _raw_eigen(model, u)
    for i in range(model.n):
        if model.gnl[i]:
            d = float(gradient_lambda(model, u, i) @ R[i])
            if abs(d) < 1e-10:
                raise NonHyperbolic(f"family {i} is not genuinely nonlinear at {u}")
            R[i] *= model.k[i] / d
        elif R[i] @ model._reference_vectors[i] < 0:
            R[i] = -R[i]
    L = np.linalg.inv(R.T)
    return EigenData(lam, R, L)


def domain_samples(model: FluxModel, count: int) -> np.ndarray:
    """Deterministic low-discrepancy states filling the domain ball."""
    pts = qmc.Halton(d=model.n, scramble=False).random(count)
    x = 2.0 * pts - 1.0
    sup = np.max(np.abs(x), axis=1)
    two = np.linalg.norm(x, axis=1)
    scale = np.divide(sup, two, out=np.zeros_like(sup), where=two > 0)
    # shrink slightly so rounding never leaves the ball
    return model.origin + (1 - 1e-9) * model.domain_radius * x * scale[:, None]


@dataclass
class HyperbolicityReport:
    min_gap: float
    max_duality_error: float
    max_normalization_error: float
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.min_gap > 0


def check_hyperbolicity(model: FluxModel, samples: int) -> HyperbolicityReport:
    if samples < 1:
        raise BadParameter("samples must be >= 1")
    min_gap = math.inf
    dual = 0.0
    norm_err = 0.0
    failures = []
    eye = np.eye(model.n)
    for u in domain_samples(model, samples):
        try:
            ed = eigen_at(model, u)
        except NonHyperbolic as exc:
            failures.append(str(exc))
            min_gap = 0.0
            continue
        if model.n > 1:
            min_gap = min(min_gap, float(np.min(np.diff(ed.lambdas))))
        dual = max(dual, float(np.max(np.abs(ed.left_vecs @ ed.right_vecs.T - eye))))
        for i in range(model.n):
            if model.gnl[i]:
                d = float(gradient_lambda(model, u, i) @ ed.right_vecs[i])
                norm_err = max(norm_err, abs(d - model.k[i]))
    return HyperbolicityReport(min_gap, dual, norm_err, failures)


# ---------------------------------------------------------------------------
# built-in models


def _burgers(k=1.0, domain_radius=0.5, center=0.0) -> FluxModel:
    k = float(k)

    def flux(u):
        return np.array([0.5 * u[0] * u[0]])

    def jacobian(u):
        return np.array([[u[0]]])

    def eigen_fn(u):
        return np.array([u[0]]), np.array([[k]]), np.array([[1.0 / k]])

    def rarefaction_fn(i, sigma, u):
        return np.array([u[0] + k * sigma])

    def left_batch_fn(states):
        return np.full((states.shape[0], 1, 1), 1.0 / k)

    def shock_fn(i, sigma, u):
        up = u[0] + k * sigma
        return np.array([up]), 0.5 * (u[0] + up)

    return FluxModel("burgers", 1, flux, jacobian, (GNL,), (k,), float(domain_radius),
                     (float(center),), {"k": k}, eigen_fn, rarefaction_fn, shock_fn, left_batch_fn)


def _p_system(gamma=1.4, k=(1.0, 1.0), domain_radius=0.5, center=(1.0, 0.0)) -> FluxModel:
    """Isentropic gas dynamics in Lagrangian coordinates, state (v, u).

    v_t - u_x = 0,  u_t + p(v)_x = 0,  p(v) = v**(-gamma).
    """
    gamma = float(gamma)
    if not gamma > 1:
        raise BadParameter(f"p-system needs gamma > 1, got {gamma}")
    k1, k2 = (float(x) for x in k)
    center = tuple(float(x) for x in center)
    if center[0] - domain_radius <= 0:
        raise BadParameter("domain reaches vacuum (v <= 0)")
    sg = math.sqrt(gamma)
    b = (gamma + 1) / 2

    def sound(v):
        return sg * v ** (-b)

    def volume(c):
        return (c / sg) ** (-1.0 / b)

    def G(v):  # antiderivative of sound speed
        return 2 * sg / (1 - gamma) * v ** ((1 - gamma) / 2)

    def pressure_slope(v, vp):
        d = vp - v
        if d == 0.0:
            return -gamma * v ** (-gamma - 1)
        return v ** (-gamma) * math.expm1(-gamma * math.log1p(d / v)) / d

    def flux(w):
        return np.array([-w[1], w[0] ** (-gamma)])

    def jacobian(w):
        return np.array([[0.0, -1.0], [-gamma * w[0] ** (-gamma - 1), 0.0]])

    def eigen_fn(w):
        v = float(w[0])
        c = sound(v)
        s1 = k1 * v / (b * c)
        s2 = k2 * v / (b * c)
        lam = np.array([-c, c])
        R = np.array([[s1, s1 * c], [-s2, s2 * c]])
        L = np.array([[0.5 / s1, 0.5 / (s1 * c)], [-0.5 / s2, 0.5 / (s2 * c)]])
        return lam, R, L

    def left_batch_fn(states):
        v = states[:, 0]
        c = sg * v ** (-b)
        s1 = k1 * v / (b * c)
        s2 = k2 * v / (b * c)
        out = np.empty((v.size, 2, 2))
        out[:, 0, 0] = 0.5 / s1
        out[:, 0, 1] = 0.5 / (s1 * c)
        out[:, 1, 0] = -0.5 / s2
        out[:, 1, 1] = 0.5 / (s2 * c)
        return out

    def _target_volume(i, sigma, v):
        c = sound(v)
        cp = c - k1 * sigma if i == 0 else c + k2 * sigma
        if cp <= 0:
            raise OutOfDomain("Lax curve reaches vacuum")
        return volume(cp)

    def rarefaction_fn(i, sigma, w):
        v, u = float(w[0]), float(w[1])
        vp = _target_volume(i, sigma, v)
        dG = G(vp) - G(v)
        return np.array([vp, u + dG if i == 0 else u - dG])

    def shock_fn(i, sigma, w):
        v, u = float(w[0]), float(w[1])
        vp = _target_volume(i, sigma, v)
        s = math.sqrt(-pressure_slope(v, vp))
        if i == 0:
            s = -s
        return np.array([vp, u - s * (vp - v)]), s

    return FluxModel("p_system", 2, flux, jacobian, (GNL, GNL), (k1, k2), float(domain_radius),
                     center, {"gamma": gamma, "k": [k1, k2]}, eigen_fn, rarefaction_fn, shock_fn, left_batch_fn)


def _linear(A, domain_radius=0.5, center=None) -> FluxModel:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BadParameter("linear model needs a square matrix")
    n = A.shape[0]
    w, V = np.linalg.eig(A)
    if np.any(np.abs(w.imag) > 0):
        raise BadParameter("matrix has complex eigenvalues")
    order = np.argsort(w.real)
    lam = w.real[order]
    if n > 1 and np.min(np.diff(lam)) <= EIGEN_GAP_TOL:
        raise BadParameter("matrix eigenvalues are not distinct")
    R = np.array(V.real[:, order].T)
    for i in range(n):
        R[i] /= np.linalg.norm(R[i])
        if R[i][np.argmax(np.abs(R[i]))] < 0:
            R[i] = -R[i]
    L = np.linalg.inv(R.T)
    for arr in (lam, R, L, A):
        arr.setflags(write=False)

    def flux(u):
        return A @ u

    def jacobian(u):
        return A

    def eigen_fn(u):
        return lam, R, L

    def rarefaction_fn(i, sigma, u):
        return u + sigma * R[i]

    def shock_fn(i, sigma, u):
        return u + sigma * R[i], float(lam[i])

    def left_batch_fn(states):
        return np.broadcast_to(L, (states.shape[0], n, n))

    center = (0.0,) * n if center is None else tuple(float(x) for x in center)
    return FluxModel("linear", n, flux, jacobian, (LD,) * n, (1.0,) * n, float(domain_radius),
                     center, {"A": A.tolist()}, eigen_fn, rarefaction_fn, shock_fn, left_batch_fn)


_BUILTINS = {"burgers": _burgers, "p_system": _p_system, "linear": _linear}


def builtin(model_id: str, **params) -> FluxModel:
    """Construct a built-in model: ``burgers``, ``p_system`` or ``linear``."""
    try:
        factory = _BUILTINS[model_id]
    except KeyError:
        raise BadParameter(f"unknown model {model_id!r}; choose from {sorted(_BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise BadParameter(f"bad parameters for {model_id}: {exc}") from None
