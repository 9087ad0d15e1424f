"""Glimm functionals and the stability functional on step functions.

A step function is right-continuous, equal to a background state (the model
origin) outside ``[x_1, x_{N+1})``.  All functionals are evaluated exactly:
jump data is constant between breakpoints, so integrals are finite sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter
from .flux_models import FluxModel
from .riemann import solve_shock_strengths, solve_strengths

MERGE_TOL = 1e-14


@dataclass(frozen=True)
class StabilityConstants:
    C0: float = 4.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        for name in ("C0", "kappa1", "kappa2", "delta"):
            if not getattr(self, name) > 0:
                raise BadParameter(f"{name} must be positive")

    @property
    def max_weight(self) -> float:
        """Upper bound for W_i when both arguments have Upsilon <= delta."""
        k1, k2 = self.kappa1, self.kappa2
        return 1 + 2 * k1 * self.delta + 2 * k1 * k2 * self.delta / self.C0

    def weights_bounded(self) -> bool:
        return self.max_weight <= 2.0


class PiecewiseConstantFn:
    """Right-continuous step function ``sum values[a] * chi[bp[a], bp[a+1])``."""

    __slots__ = ("breakpoints", "values", "background")

    def __init__(self, breakpoints, values, background, canonical=True):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        bg = np.asarray(background, dtype=float).ravel()
        vals = np.asarray(values, dtype=float).reshape(-1, bg.size)
        if bp.size == 0 and vals.shape[0] == 0:
            pass
        elif bp.size != vals.shape[0] + 1:
            raise BadParameter("need exactly one more breakpoint than values")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise BadParameter("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise BadParameter("non-finite breakpoints or values")
        if canonical:
            bp, vals = _canonical(bp, vals, bg)
        self.breakpoints = bp
        self.values = vals
        self.background = bg
        for arr in (bp, vals, bg):
            arr.setflags(write=False)

    @classmethod
    def constant(cls, model: FluxModel):
        return cls([], np.zeros((0, model.n)), model.origin)

    @classmethod
    def from_steps(cls, model: FluxModel, breakpoints, values):
        return cls(breakpoints, values, model.origin)

    @property
    def n(self) -> int:
        return self.background.size

    @property
    def is_constant(self) -> bool:
        return self.values.shape[0] == 0

    @property
    def support(self):
        if self.is_constant:
            return None
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def states(self) -> np.ndarray:
        """Background, then every plateau value, then background again."""
        return np.vstack([self.background, self.values, self.background])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        if self.is_constant:
            out = np.tile(self.background, (xs.size, 1))
        else:
            idx = np.searchsorted(self.breakpoints, xs, side="right")
            out = self.states()[idx]
        return out[0] if scalar else out

    def left_limit(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xs = np.atleast_1d(x)
        if self.is_constant:
            out = np.tile(self.background, (xs.size, 1))
        else:
            idx = np.searchsorted(self.breakpoints, xs, side="left")
            out = self.states()[idx]
        return out[0] if scalar else out

    def jumps(self):
        """Positions with left and right states (canonical form: all genuine)."""
        s = self.states()
        return self.breakpoints.copy(), s[:-1].copy(), s[1:].copy()

    def total_variation(self) -> float:
        _, left, right = self.jumps()
        return float(np.sum(np.linalg.norm(right - left, axis=1)))

    def l1_distance(self, other: "PiecewiseConstantFn") -> float:
        pts = np.union1d(self.breakpoints, other.breakpoints)
        if pts.size < 2:
            return 0.0
        a = self(pts[:-1])
        b = other(pts[:-1])
        return float(np.sum(np.diff(pts) * np.linalg.norm(a - b, axis=1)))

    def shifted(self, h: float) -> "PiecewiseConstantFn":
        return PiecewiseConstantFn(self.breakpoints + h, self.values, self.background, canonical=False)

    def to_json(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, model: FluxModel, data: dict):
        vals = data.get("values", [])
        return cls(data.get("breakpoints", []), np.asarray(vals, dtype=float).reshape(-1, model.n), model.origin)

    def __repr__(self):
        return f"PiecewiseConstantFn(breakpoints={self.breakpoints.tolist()}, values={self.values.tolist()})"


def _canonical(bp, vals, bg):
    if vals.shape[0] == 0:
        return np.zeros(0), vals
    states = np.vstack([bg, vals, bg])
    same = np.all(np.abs(np.diff(states, axis=0)) <= MERGE_TOL, axis=1)
    # keep breakpoints that separate distinct states; merge the rest
    keep_bp = bp[~same]
    if keep_bp.size == 0:
        return np.zeros(0), np.zeros((0, bg.size))
    idx = np.searchsorted(bp, keep_bp[:-1], side="right") - 1
    return keep_bp, vals[idx].copy()


# ---------------------------------------------------------------------------
# jump tables and Glimm functionals


@dataclass
class JumpTable:
    """Ordered jumps with per-family strengths.

    Order, not position, decides approaching pairs: fronts sharing a position
    keep their fan order.
    """

    positions: np.ndarray
    strengths: np.ndarray
    gnl: tuple
    left: np.ndarray = None
    right: np.ndarray = None

    @property
    def families(self) -> int:
        return len(self.gnl)

    def __len__(self):
        return self.positions.size


def jump_strengths(model: FluxModel, u: PiecewiseConstantFn) -> JumpTable:
    pos, left, right = u.jumps()
    sig = np.zeros((pos.size, model.n))
    for a in range(pos.size):
        sig[a] = solve_strengths(model, left[a], right[a])
    return JumpTable(pos, sig, model.gnl, left, right)


def table_V(t: JumpTable) -> float:
    return float(np.sum(np.abs(t.strengths)))


def table_Q(t: JumpTable) -> float:
    """Interaction potential by prefix sums, O(M n)."""
    if len(t) < 2:
        return 0.0
    s = t.strengths
    a = np.abs(s)
    before = np.cumsum(a, axis=0) - a  # sums over earlier jumps, per family
    # transversal: earlier wave of a faster family i > j
    faster_before = np.cumsum(before[:, ::-1], axis=1)[:, ::-1] - before  # sum_{i>j} before[:, i]
    total = float(np.sum(a * faster_before))
    for i, g in enumerate(t.gnl):
        if not g:
            continue
        pos = np.maximum(s[:, i], 0.0)
        pos_before = np.cumsum(pos) - pos
        total += float(np.sum(a[:, i] * before[:, i]) - np.sum(pos * pos_before))
    return max(total, 0.0)


def table_Q_bruteforce(t: JumpTable) -> float:
    """Double loop over pairs; reference for ``table_Q``."""
    total = 0.0
    m = len(t)
    for x in range(m):
        for y in range(x + 1, m):
            for i in range(t.families):
                for j in range(t.families):
                    sx, sy = t.strengths[x, i], t.strengths[y, j]
                    if i > j or (i == j and t.gnl[i] and min(sx, sy) < 0):
                        total += abs(sx * sy)
    return total


def linear_functional(model: FluxModel, u: PiecewiseConstantFn) -> float:
    return table_V(jump_strengths(model, u))


def interaction_potential(model: FluxModel, u: PiecewiseConstantFn) -> float:
    return table_Q(jump_strengths(model, u))


def glimm_total(model: FluxModel, u: PiecewiseConstantFn, consts: StabilityConstants) -> float:
    t = jump_strengths(model, u)
    return table_V(t) + consts.C0 * table_Q(t)


def in_domain_star(model, u, consts) -> bool:
    """Membership in the small-variation step-function domain: Upsilon < delta."""
    return glimm_total(model, u, consts) < consts.delta


def _side_sums_at(t: JumpTable, xs):
    """A^-[j](x) (jumps y <= x) and A^+[j](x) (jumps y > x) for each x."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    a = np.abs(t.strengths)
    csum = np.vstack([np.zeros((1, t.families)), np.cumsum(a, axis=0)])
    k = np.searchsorted(t.positions, xs, side="right")
    minus = csum[k]
    plus = csum[-1] - minus
    return minus, plus


def side_sums(model: FluxModel, u: PiecewiseConstantFn, x: float):
    minus, plus = _side_sums_at(jump_strengths(model, u), [x])
    return {"minus": minus[0], "plus": plus[0]}


def _big_A_from_sums(minus, plus, i, q, gnl):
    """Vectorized A_i over rows of side sums; ``q`` broadcast per row."""
    val = np.sum(plus[:, :i], axis=1) + np.sum(minus[:, i + 1:], axis=1)
    if gnl[i]:
        q = np.broadcast_to(np.asarray(q, dtype=float), val.shape)
        val = val + np.where(q >= 0, plus[:, i], minus[:, i])
    return val


def table_big_A(t: JumpTable, i: int, q: float, x: float) -> float:
    minus, plus = _side_sums_at(t, [x])
    return float(_big_A_from_sums(minus, plus, i, q, t.gnl)[0])


def big_A(model: FluxModel, u: PiecewiseConstantFn, i: int, q: float, x: float) -> float:
    return table_big_A(jump_strengths(model, u), i, q, x)


def stability_weight(model, v, v_tilde, i, q, x, consts: StabilityConstants) -> float:
    tv = jump_strengths(model, v)
    tw = jump_strengths(model, v_tilde)
    k1, k2 = consts.kappa1, consts.kappa2
    return (1 + k1 * table_big_A(tv, i, q, x) + k1 * table_big_A(tw, i, -q, x)
            + k1 * k2 * (table_Q(tv) + table_Q(tw)))


# ---------------------------------------------------------------------------
# stability functional


@dataclass
class PhiBreakdown:
    value: float
    points: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def pointwise_q(model, v, v_tilde, pts):
    """q on each interval ``[pts[k], pts[k+1])`` of a common refinement."""
    pts = np.asarray(pts, dtype=float)
    a = v(pts[:-1])
    b = v_tilde(pts[:-1])
    q = np.zeros((pts.size - 1, model.n))
    for k in range(pts.size - 1):
        if not np.array_equal(a[k], b[k]):
            q[k] = solve_shock_strengths(model, a[k], b[k])
    return q


def phi_from_tables(model, v, v_tilde, tab_v, tab_w, Q_v, Q_w, consts) -> PhiBreakdown:
    """Phi with explicit tables for the A-weights and explicit Q values.

    ``stability_phi`` passes the jump tables of v and v_tilde; the
    front-tracking variant passes physical fronts only and Q with the
    non-physical family included.
    """
    pts = np.union1d(v.breakpoints, v_tilde.breakpoints)
    if pts.size < 2:
        return PhiBreakdown(0.0, pts, np.zeros((0, model.n)), np.zeros((0, model.n)))
    q = pointwise_q(model, v, v_tilde, pts)
    lengths = np.diff(pts)
    left = pts[:-1]
    mv, pv = _side_sums_at(tab_v, left)
    mw, pw = _side_sums_at(tab_w, left)
    k1, k2 = consts.kappa1, consts.kappa2
    W = np.empty_like(q)
    for i in range(model.n):
        W[:, i] = (1 + k1 * _big_A_from_sums(mv, pv, i, q[:, i], tab_v.gnl)
                   + k1 * _big_A_from_sums(mw, pw, i, -q[:, i], tab_w.gnl)
                   + k1 * k2 * (Q_v + Q_w))
    value = float(np.sum(lengths[:, None] * np.abs(q) * W))
    return PhiBreakdown(value, pts, q, W)


def stability_phi(model: FluxModel, v, v_tilde, consts: StabilityConstants, detail=False):
    tv = jump_strengths(model, v)
    tw = jump_strengths(model, v_tilde)
    out = phi_from_tables(model, v, v_tilde, tv, tw, table_Q(tv), table_Q(tw), consts)
    return out if detail else out.value


def sample_coarsen(u: PiecewiseConstantFn, partition, samples) -> PiecewiseConstantFn:
    """``sum_a u(y_a) chi[x_a, x_{a+1})`` with ``y_a`` in ``[x_a, x_{a+1})``."""
    xs = np.asarray(partition, dtype=float)
    ys = np.asarray(samples, dtype=float)
    if xs.size != ys.size + 1:
        raise BadParameter("need one sample per partition interval")
    if np.any(ys < xs[:-1]) or np.any(ys >= xs[1:]):
        raise BadParameter("sample points must lie in their intervals")
    return PiecewiseConstantFn(xs, u(ys), u.background)
