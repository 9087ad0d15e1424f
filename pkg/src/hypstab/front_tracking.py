"""Event-driven epsilon-approximate front tracking.

Initial jumps are replaced by discretized Riemann fans.  Fronts move with
constant speed until two adjacent fronts meet; the collision is resolved by
the accurate solver (a fresh fan) when the product of strengths is at least
the threshold, and by the simplified solver otherwise.  The simplified solver
lets the incoming waves cross (or merge, for one family) and puts the
leftover jump into a non-physical front moving at a speed larger than every
characteristic speed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter, CollisionCascade
from .flux_models import FluxModel, eigen_at
from .functionals_pcw import (JumpTable, PiecewiseConstantFn, StabilityConstants, jump_strengths,
                              phi_from_tables, stability_phi, table_Q, table_V)
from .riemann import (CONTACT, NONPHYSICAL, PRUNE, RAREFACTION, SHOCK, _lax, _shock, fan_from_strengths,
                      solve_strengths)

MAX_EVENTS = 1_000_000
TIME_WINDOW = 1e-13
ACCURATE = "accurate"
SIMPLIFIED = "simplified"
CROSSING = "nonphysical-crossing"


class Front:
    __slots__ = ("x", "speed", "family", "strength", "kind", "left", "right", "t0", "x0", "serial")

    def __init__(self, x, speed, family, strength, kind, left, right, t0):
        self.x = x
        self.speed = speed
        self.family = family
        self.strength = strength
        self.kind = kind
        self.left = left
        self.right = right
        self.t0 = t0
        self.x0 = x
        self.serial = 0

    @property
    def physical(self) -> bool:
        return self.family != NONPHYSICAL

    def to_json(self):
        return {"x": self.x, "speed": self.speed, "family": self.family, "strength": self.strength,
                "kind": self.kind, "left": self.left.tolist(), "right": self.right.tolist()}


@dataclass
class Event:
    time: float
    position: float
    solver: str
    incoming: list
    outgoing: list

    def to_json(self):
        return {"time": self.time, "position": self.position, "solver": self.solver,
                "incoming": self.incoming, "outgoing": self.outgoing}


@dataclass
class FTTrajectory:
    model: FluxModel
    eps: float
    T: float
    background: np.ndarray
    consts: StabilityConstants
    # segments: one row per front lifetime
    seg_t0: np.ndarray = None
    seg_t1: np.ndarray = None
    seg_x0: np.ndarray = None
    seg_speed: np.ndarray = None
    seg_family: np.ndarray = None
    seg_strength: np.ndarray = None
    seg_order: np.ndarray = None
    seg_final: np.ndarray = None
    seg_left: np.ndarray = None
    seg_right: np.ndarray = None
    events: list = field(default_factory=list)
    # diagnostics after the initial fans and after every event
    diag_t: np.ndarray = None
    diag_V: np.ndarray = None
    diag_Q: np.ndarray = None
    diag_upsilon: np.ndarray = None
    diag_np: np.ndarray = None
    max_np: float = 0.0
    threshold: float = 0.0

    @property
    def event_times(self):
        return np.array([e.time for e in self.events])

    def active(self, t: float):
        """Indices of fronts alive at ``t`` (post-event state at event times), in spatial order."""
        if not 0 <= t <= self.T * (1 + 1e-15) + 1e-15:
            raise BadParameter(f"time {t} outside [0, {self.T}]")
        alive = (self.seg_t0 <= t) & ((t < self.seg_t1) | (self.seg_final & (t <= self.seg_t1)))
        sel = np.nonzero(alive)[0]
        x = self.seg_x0[sel] + self.seg_speed[sel] * (t - self.seg_t0[sel])
        order = np.lexsort((self.seg_order[sel], x))
        return sel[order], x[order]

    def fronts_at(self, t: float):
        idx, x = self.active(t)
        return [Front(float(xx), float(self.seg_speed[k]), int(self.seg_family[k]), float(self.seg_strength[k]),
                      "", self.seg_left[k], self.seg_right[k], t) for k, xx in zip(idx, x)]

    def snapshot(self, t: float) -> PiecewiseConstantFn:
        idx, x = self.active(t)
        if idx.size == 0:
            return PiecewiseConstantFn([], np.zeros((0, self.model.n)), self.background)
        # a group of fronts at one position acts as a single jump
        last = np.concatenate([x[1:] != x[:-1], [True]])
        bps = x[last]
        vals = self.seg_right[idx[last]][:-1]
        return PiecewiseConstantFn(bps, vals, self.background)

    def front_table(self, t: float, include_nonphysical=True) -> JumpTable:
        """Fronts as a jump table; non-physical fronts form an extra LD family."""
        idx, x = self.active(t)
        n = self.model.n
        fam = self.seg_family[idx]
        keep = np.ones(idx.size, bool) if include_nonphysical else fam != NONPHYSICAL
        idx, x, fam = idx[keep], x[keep], fam[keep]
        cols = n + 1 if include_nonphysical else n
        s = np.zeros((idx.size, cols))
        phys = fam != NONPHYSICAL
        s[np.nonzero(phys)[0], fam[phys]] = self.seg_strength[idx[phys]]
        if include_nonphysical:
            s[~phys, n] = self.seg_strength[idx[~phys]]
        gnl = tuple(self.model.gnl) + ((False,) if include_nonphysical else ())
        return JumpTable(x, s, gnl)

    def upsilon_eps(self, t: float) -> float:
        tab = self.front_table(t)
        return table_V(tab) + self.consts.C0 * table_Q(tab)

    def to_json(self):
        return {"eps": self.eps, "T": self.T, "threshold": self.threshold,
                "events": [e.to_json() for e in self.events],
                "diagnostics": {"t": self.diag_t.tolist(), "V": self.diag_V.tolist(), "Q": self.diag_Q.tolist(),
                                "upsilon": self.diag_upsilon.tolist(), "nonphysical": self.diag_np.tolist()}}


def nonphysical_speed(model: FluxModel) -> float:
    return model.max_speed + 1.0


def _fan_fronts(model, um, up, x, t, eps, unsplit=(), sigmas=None):
    sig = solve_strengths(model, um, up) if sigmas is None else sigmas
    fan = fan_from_strengths(model, um, up, sig, eps, unsplit)
    return [Front(x, w.speed, w.family, w.strength, w.kind, w.left, w.right, t) for w in fan.waves]


def _wave_front(model, i, sigma, left, x, t):
    """Single physical front of family i and strength sigma leaving ``left``."""
    if model.gnl[i] and sigma < 0:
        right, s = _shock(model, i, sigma, left)
        return Front(x, s, i, sigma, SHOCK, left, right, t)
    right = _lax(model, i, sigma, left)
    if model.gnl[i]:
        s = float(eigen_at(model, right, check=False).lambdas[i])
        return Front(x, s, i, sigma, RAREFACTION, left, right, t)
    s = float(eigen_at(model, left, check=False).lambdas[i])
    return Front(x, s, i, sigma, CONTACT, left, right, t)


def _nonphysical(left, right, x, t, speed):
    return Front(x, speed, NONPHYSICAL, float(np.linalg.norm(right - left)), "nonphysical", left, right, t)


def _resolve(model, a: Front, b: Front, x, t, eps, threshold, np_speed):
    """Outgoing fronts for the collision of adjacent fronts a (left) and b (right)."""
    uL, uR = a.left, b.right
    if not a.physical and not b.physical:
        # equal speeds never meet; only reachable through rounding
        return [_nonphysical(uL, uR, x, t, np_speed)], SIMPLIFIED
    if not a.physical or not b.physical:
        phys = b if not a.physical else a
        out = _wave_front(model, phys.family, phys.strength, uL, x, t)
        return [out, _nonphysical(out.right, uR, x, t, np_speed)], CROSSING
    i, j = a.family, b.family
    if abs(a.strength * b.strength) >= threshold or i < j:
        unsplit = {f.family for f in (a, b) if f.kind == RAREFACTION}
        return _fan_fronts(model, uL, uR, x, t, eps, tuple(unsplit)), ACCURATE
    if i == j:
        out = [_wave_front(model, i, a.strength + b.strength, uL, x, t)]
    else:
        first = _wave_front(model, j, b.strength, uL, x, t)
        out = [first, _wave_front(model, i, a.strength, first.right, x, t)]
    out.append(_nonphysical(out[-1].right, uR, x, t, np_speed))
    return out, SIMPLIFIED


def _prune(fronts):
    keep = []
    for f in fronts:
        if abs(f.strength) > PRUNE:
            keep.append(f)
    if keep:
        # states must chain exactly even after pruning a tiny front
        keep[0].left = fronts[0].left
        keep[-1].right = fronts[-1].right
        for u, v in zip(keep[:-1], keep[1:]):
            v.left = u.right
    return keep


def _table_of(model, fronts):
    n = model.n
    s = np.zeros((len(fronts), n + 1))
    pos = np.empty(len(fronts))
    for k, f in enumerate(fronts):
        pos[k] = f.x
        s[k, f.family if f.physical else n] = f.strength
    return JumpTable(pos, s, tuple(model.gnl) + (False,))


def ft_solve(model: FluxModel, u0: PiecewiseConstantFn, eps: float, T: float,
             consts: StabilityConstants = StabilityConstants(), threshold=None,
             max_events: int = MAX_EVENTS) -> FTTrajectory:
    """Evolve ``u0`` on ``[0, T]``.

    ``threshold`` is the interaction size (product of strengths) below which
    the simplified solver is used; it defaults to ``eps``.
    """
    if not eps > 0:
        raise BadParameter("eps must be positive")
    if T < 0:
        raise BadParameter("T must be nonnegative")
    threshold = eps if threshold is None else float(threshold)
    np_speed = nonphysical_speed(model)
    fronts = []
    pos, left, right = u0.jumps()
    for x, um, up in zip(pos, left, right):
        fronts.extend(_fan_fronts(model, um, up, float(x), 0.0, eps))
    fronts = _prune(fronts) if fronts else fronts

    segs = []  # (t0, t1, x0, speed, family, strength, serial, final, left, right)
    serial = [0]

    def number(new):
        # creation order breaks ties between fronts sharing a position
        for f in new:
            f.serial = serial[0]
            serial[0] += 1

    def close(f, t1, final=False):
        segs.append((f.t0, t1, f.x0, f.speed, f.family, f.strength, f.serial, final, f.left, f.right))

    number(fronts)

    diag = []

    def record(t):
        tab = _table_of(model, fronts)
        V = table_V(tab)
        Q = table_Q(tab)
        npt = float(sum(f.strength for f in fronts if not f.physical))
        diag.append((t, V, Q, V + consts.C0 * Q, npt))

    record(0.0)
    events = []
    t = 0.0
    while True:
        m = len(fronts)
        if m >= 2:
            x = np.fromiter((f.x for f in fronts), float, m)
            s = np.fromiter((f.speed for f in fronts), float, m)
            closing = s[:-1] - s[1:]
            gap = np.maximum(x[1:] - x[:-1], 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                dt = np.where(closing > 0, gap / closing, np.inf)
            dmin = float(dt.min())
        else:
            dmin = math.inf
        if not t + dmin < T:
            break
        if len(events) >= max_events:
            raise CollisionCascade(f"more than {max_events} interactions before t={T}")
        k = int(np.nonzero(dt <= dmin + TIME_WINDOW)[0][0])  # leftmost within the window
        dt_k = float(dt[k])
        t_new = t + dt_k
        for f in fronts:
            f.x = f.x + f.speed * dt_k
        t = t_new
        a, b = fronts[k], fronts[k + 1]
        xc = a.x if a.x == b.x else 0.5 * (a.x + b.x)
        out, solver = _resolve(model, a, b, xc, t, eps, threshold, np_speed)
        out = [f for f in out if abs(f.strength) > PRUNE]
        if out:
            out[0].left = a.left
            out[-1].right = b.right
            for u, v in zip(out[:-1], out[1:]):
                v.left = u.right
        close(a, t)
        close(b, t)
        for f in out:
            f.x = xc
        number(out)
        fronts[k:k + 2] = out
        events.append(Event(t, xc, solver,
                            [a.to_json(), b.to_json()], [f.to_json() for f in out]))
        record(t)

    for f in fronts:
        close(f, T, final=True)
    tr = FTTrajectory(model, eps, T, u0.background.copy(), consts, threshold=threshold)
    if segs:
        cols = list(zip(*segs))
        tr.seg_t0, tr.seg_t1, tr.seg_x0, tr.seg_speed = (np.array(c, dtype=float) for c in cols[:4])
        tr.seg_family = np.array(cols[4], dtype=int)
        tr.seg_strength = np.array(cols[5], dtype=float)
        tr.seg_order = np.array(cols[6], dtype=int)
        tr.seg_final = np.array(cols[7], dtype=bool)
        tr.seg_left = np.array(cols[8]).reshape(-1, model.n)
        tr.seg_right = np.array(cols[9]).reshape(-1, model.n)
    else:
        tr.seg_t0 = tr.seg_t1 = tr.seg_x0 = tr.seg_speed = tr.seg_strength = np.zeros(0)
        tr.seg_family = tr.seg_order = np.zeros(0, dtype=int)
        tr.seg_final = np.zeros(0, dtype=bool)
        tr.seg_left = tr.seg_right = np.zeros((0, model.n))
    tr.events = events
    d = np.array(diag)
    tr.diag_t, tr.diag_V, tr.diag_Q, tr.diag_upsilon, tr.diag_np = (d[:, c].copy() for c in range(5))
    tr.max_np = float(d[:, 4].max())
    return tr


def snapshot(traj: FTTrajectory, t: float) -> PiecewiseConstantFn:
    return traj.snapshot(t)


@dataclass
class TimelineRow:
    t: float
    phi: float
    l1: float
    upsilon: float
    upsilon_tilde: float


def phi_timeline(model, traj, traj_tilde, consts, sample_times):
    rows = []
    for t in sample_times:
        w = traj.snapshot(t)
        wt = traj_tilde.snapshot(t)
        rows.append(TimelineRow(float(t), stability_phi(model, w, wt, consts), w.l1_distance(wt),
                                traj.upsilon_eps(t), traj_tilde.upsilon_eps(t)))
    return rows


def _eps_tables(model, traj, t, w):
    """Jump table of the snapshot split into physical jumps (for the A-weights)
    and the full table with non-physical fronts as family n+1 (for Q)."""
    tab = jump_strengths(model, w)
    idx, x = traj.active(t)
    fam = traj.seg_family[idx]
    np_pos = {}
    for k, xx, f in zip(idx, x, fam):
        np_pos.setdefault(float(xx), []).append(f)
    n = model.n
    is_np = np.array([np_pos.get(float(xx), [0]) == [NONPHYSICAL] for xx in tab.positions], dtype=bool)
    phys = JumpTable(tab.positions[~is_np], tab.strengths[~is_np], tab.gnl)
    ext = np.zeros((len(tab), n + 1))
    ext[:, :n] = tab.strengths
    ext[is_np, :n] = 0.0
    ext[is_np, n] = np.linalg.norm(tab.right[is_np] - tab.left[is_np], axis=1)
    full = JumpTable(tab.positions, ext, tuple(model.gnl) + (False,))
    return phys, full


def phi_eps_value(model, traj, traj_tilde, consts, t) -> float:
    """Phi with non-physical fronts dropped from the A-weights and counted as
    an extra family in the interaction potential.

    Physical jumps keep the strengths of the snapshot, so with no
    non-physical fronts present this equals ``stability_phi`` exactly.
    """
    w = traj.snapshot(t)
    wt = traj_tilde.snapshot(t)
    pv, fv = _eps_tables(model, traj, t, w)
    pw, fw = _eps_tables(model, traj_tilde, t, wt)
    return phi_from_tables(model, w, wt, pv, pw, table_Q(fv), table_Q(fw), consts).value


def phi_eps_compare(model, traj, traj_tilde, consts, t, C_fit=None):
    w = traj.snapshot(t)
    wt = traj_tilde.snapshot(t)
    phi = stability_phi(model, w, wt, consts)
    phi_eps = phi_eps_value(model, traj, traj_tilde, consts, t)
    l1 = w.l1_distance(wt)
    out = {"phi": phi, "phi_eps": phi_eps, "gap": abs(phi - phi_eps), "l1": l1}
    if C_fit is not None:
        out["bound"] = C_fit * traj.eps * l1
    return out
