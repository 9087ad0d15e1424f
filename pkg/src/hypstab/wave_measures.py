"""Wave measures of BV functions built from affine pieces and jumps.

The distributional derivative of ``u`` splits into a density part (on the
affine pieces) and atoms (at the jumps).  The i-th wave measure is
``l_i(u) du`` on the density part plus the Riemann strengths ``E_i`` at the
atoms.  Densities are stored piecewise constant on a fine cell grid, after
which every measure operation (Jordan parts, interval masses, half-plane
products) is exact on the representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BadParameter, MeshFailure, QuadratureFailure
from .flux_models import FluxModel, eigen_at, left_vectors_many
from .functionals_pcw import PiecewiseConstantFn, StabilityConstants
from .riemann import solve_shock_strengths, solve_strengths

CELLS_PER_PIECE = 1000
_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)


# ---------------------------------------------------------------------------
# BV functions


class BVFunction:
    """Right-continuous function, affine on each ``[a_k, b_k)``, background elsewhere."""

    __slots__ = ("a", "b", "p", "slope", "background")

    def __init__(self, a, b, p, slope, background):
        bg = np.asarray(background, dtype=float).ravel()
        n = bg.size
        self.a = np.asarray(a, dtype=float).ravel()
        self.b = np.asarray(b, dtype=float).ravel()
        self.p = np.asarray(p, dtype=float).reshape(-1, n)
        self.slope = np.asarray(slope, dtype=float).reshape(-1, n)
        self.background = bg
        m = self.a.size
        if not (self.b.size == m and self.p.shape[0] == m and self.slope.shape[0] == m):
            raise BadParameter("pieces need a, b, p and slope each")
        if np.any(self.b <= self.a):
            raise BadParameter("each piece needs a < b")
        if m > 1 and np.any(self.a[1:] < self.b[:-1]):
            raise BadParameter("pieces must be ordered and non-overlapping")
        for arr in (self.a, self.b, self.p, self.slope, self.background):
            arr.setflags(write=False)

    @classmethod
    def from_pieces(cls, model: FluxModel, pieces):
        """``pieces``: iterable of dicts or tuples ``(a, b, p, slope)``."""
        rows = [(d["a"], d["b"], d["p"], d["slope"]) if isinstance(d, dict) else d for d in pieces]
        n = model.n
        if not rows:
            return cls([], [], np.zeros((0, n)), np.zeros((0, n)), model.origin)
        a, b, p, s = zip(*rows)
        p = np.array([np.broadcast_to(np.asarray(x, dtype=float), (n,)) for x in p])
        s = np.array([np.broadcast_to(np.asarray(x, dtype=float), (n,)) for x in s])
        return cls(a, b, p, s, model.origin)

    @classmethod
    def from_pcf(cls, u: PiecewiseConstantFn):
        bp = u.breakpoints
        return cls(bp[:-1], bp[1:], u.values, np.zeros_like(u.values), u.background)

    @property
    def n(self):
        return self.background.size

    @property
    def pieces(self):
        return self.a.size

    @property
    def is_piecewise_constant(self) -> bool:
        return not np.any(self.slope)

    @property
    def support(self):
        if self.pieces == 0:
            return None
        return float(self.a[0]), float(self.b[-1])

    def _eval(self, x, side):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.tile(self.background, (xs.size, 1))
        if self.pieces == 0:
            return out
        k = np.searchsorted(self.a, xs, side="right" if side == "right" else "left") - 1
        valid = k >= 0
        kk = np.where(valid, k, 0)
        inside = valid & ((xs < self.b[kk]) if side == "right" else (xs <= self.b[kk]))
        vals = self.p[kk] + self.slope[kk] * (xs - self.a[kk])[:, None]
        out[inside] = vals[inside]
        return out

    def __call__(self, x):
        out = self._eval(x, "right")
        return out[0] if np.ndim(x) == 0 else out

    def left_limit(self, x):
        out = self._eval(x, "left")
        return out[0] if np.ndim(x) == 0 else out

    def end_values(self):
        """Left limits at each ``b_k`` (value at the right end of each piece)."""
        return self.p + self.slope * (self.b - self.a)[:, None]

    def breakpoints(self) -> np.ndarray:
        return np.union1d(self.a, self.b)

    def jumps(self, tol=0.0):
        """``(positions, left, right)`` at every genuine discontinuity."""
        pts = self.breakpoints()
        left = self.left_limit(pts)
        right = self(pts)
        keep = np.linalg.norm(right - left, axis=1) > tol
        return pts[keep], left[keep], right[keep]

    def total_variation(self) -> float:
        _, l, r = self.jumps()
        dens = np.linalg.norm(self.slope, axis=1) * (self.b - self.a)
        return float(np.sum(np.linalg.norm(r - l, axis=1)) + np.sum(dens))

    def to_json(self):
        return {"pieces": [{"a": float(a), "b": float(b), "p": p.tolist(), "slope": s.tolist()}
                           for a, b, p, s in zip(self.a, self.b, self.p, self.slope)]}

    @classmethod
    def from_json(cls, model, data):
        return cls.from_pieces(model, data.get("pieces", []))

    def __repr__(self):
        return f"BVFunction({self.to_json()['pieces']})"


# ---------------------------------------------------------------------------
# signed measures


class SignedMeasure1D:
    """Atoms plus a piecewise-constant density on disjoint sorted cells."""

    __slots__ = ("atom_x", "atom_m", "lo", "hi", "dens", "_ccell")

    def __init__(self, atom_x=(), atom_m=(), lo=(), hi=(), dens=()):
        ax = np.asarray(atom_x, dtype=float).ravel()
        am = np.asarray(atom_m, dtype=float).ravel()
        order = np.argsort(ax, kind="stable")
        ax, am = ax[order], am[order]
        if ax.size > 1 and np.any(np.diff(ax) <= 0):
            raise BadParameter("atom locations must be distinct")
        self.atom_x, self.atom_m = ax, am
        self.lo = np.asarray(lo, dtype=float).ravel()
        self.hi = np.asarray(hi, dtype=float).ravel()
        self.dens = np.asarray(dens, dtype=float).ravel()
        if self.lo.size > 1 and np.any(self.lo[1:] < self.hi[:-1]):
            raise BadParameter("density cells must be sorted and disjoint")
        self._ccell = np.concatenate([[0.0], np.cumsum(self.dens * (self.hi - self.lo))])

    def _map(self, fa, fd):
        return SignedMeasure1D(self.atom_x, fa(self.atom_m), self.lo, self.hi, fd(self.dens))

    def positive(self):
        return self._map(lambda m: np.maximum(m, 0.0), lambda d: np.maximum(d, 0.0))

    def negative(self):
        return self._map(lambda m: np.maximum(-m, 0.0), lambda d: np.maximum(-d, 0.0))

    def abs(self):
        return self._map(np.abs, np.abs)

    def total(self) -> float:
        return float(np.sum(self.atom_m) + self._ccell[-1])

    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.atom_m)) + np.sum(np.abs(self.dens) * (self.hi - self.lo)))

    def _density_cdf(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if self.lo.size == 0:
            return np.zeros(xs.size)
        k = np.searchsorted(self.lo, xs, side="right") - 1
        kk = np.clip(k, 0, None)
        partial = np.where(k >= 0, np.minimum(xs - self.lo[kk], self.hi[kk] - self.lo[kk]) * self.dens[kk], 0.0)
        return np.where(k >= 0, self._ccell[kk] + partial, 0.0)

    def closed_cdf(self, xs):
        """``mu(]-inf, x])`` for each x."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        csum = np.concatenate([[0.0], np.cumsum(self.atom_m)])
        atoms = csum[np.searchsorted(self.atom_x, xs, side="right")]
        return atoms + self._density_cdf(xs)

    def open_cdf(self, xs):
        """``mu(]-inf, x[)``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        csum = np.concatenate([[0.0], np.cumsum(self.atom_m)])
        atoms = csum[np.searchsorted(self.atom_x, xs, side="left")]
        return atoms + self._density_cdf(xs)

    def open_tail(self, xs):
        """``mu(]x, +inf[)``."""
        return self.total() - self.closed_cdf(xs)

    def interval(self, lo, hi, closed_lo=False, closed_hi=False) -> float:
        upper = self.closed_cdf(hi)[0] if closed_hi else self.open_cdf(hi)[0]
        lower = self.open_cdf(lo)[0] if closed_lo else self.closed_cdf(lo)[0]
        return float(upper - lower)

    def __repr__(self):
        return (f"SignedMeasure1D(atoms={list(zip(self.atom_x.tolist(), self.atom_m.tolist()))}, "
                f"cells={self.lo.size})")


def _on_grid(m: SignedMeasure1D, edges):
    """Density of ``m`` on the refined cells ``[edges[k], edges[k+1])``."""
    if m.lo.size == 0 or edges.size < 2:
        return np.zeros(max(edges.size - 1, 0))
    mids = 0.5 * (edges[:-1] + edges[1:])
    k = np.searchsorted(m.lo, mids, side="right") - 1
    kk = np.clip(k, 0, None)
    inside = (k >= 0) & (mids < m.hi[kk])
    return np.where(inside, m.dens[kk], 0.0)


def half_plane_product(mu: SignedMeasure1D, nu: SignedMeasure1D) -> float:
    """``(mu x nu)({(x, y): x < y})``, exact for atoms plus cellwise-constant densities."""
    edges = np.union1d(np.concatenate([mu.lo, mu.hi]), np.concatenate([nu.lo, nu.hi]))
    dm = _on_grid(mu, edges)
    dn = _on_grid(nu, edges)
    widths = np.diff(edges) if edges.size > 1 else np.zeros(0)
    ax = np.union1d(mu.atom_x, nu.atom_x)
    am = np.zeros(ax.size)
    an = np.zeros(ax.size)
    am[np.searchsorted(ax, mu.atom_x)] = mu.atom_m
    an[np.searchsorted(ax, nu.atom_x)] = nu.atom_m
    # sort key: atom at p sits after the cell ending at p and before the cell starting at p
    keys = np.concatenate([ax, edges[:-1]]) if widths.size else ax
    kind = np.concatenate([np.zeros(ax.size), np.ones(widths.size)])
    mass_mu = np.concatenate([am, dm * widths])
    mass_nu = np.concatenate([an, dn * widths])
    order = np.lexsort((kind, keys))
    mass_mu = mass_mu[order]
    mass_nu = mass_nu[order]
    before = np.cumsum(mass_mu) - mass_mu
    within = 0.5 * float(np.sum(dm * dn * widths * widths))
    return float(np.sum(before * mass_nu)) + within


# ---------------------------------------------------------------------------
# wave measures


@dataclass
class WaveMeasureSet:
    mu: list
    gnl: tuple
    variation: SignedMeasure1D = field(repr=False)  # |Du| with the Euclidean norm

    def __post_init__(self):
        self.plus = [m.positive() for m in self.mu]
        self.minus = [m.negative() for m in self.mu]
        self.absolute = [m.abs() for m in self.mu]

    @property
    def n(self):
        return len(self.mu)


def _cells(u: BVFunction):
    """Grid cells on every sloped piece."""
    los, his, piece = [], [], []
    for k in range(u.pieces):
        if not np.any(u.slope[k]):
            continue
        e = np.linspace(u.a[k], u.b[k], CELLS_PER_PIECE + 1)
        los.append(e[:-1])
        his.append(e[1:])
        piece.append(np.full(CELLS_PER_PIECE, k))
    if not los:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=int)
    return np.concatenate(los), np.concatenate(his), np.concatenate(piece)


def wave_measures(model: FluxModel, u: BVFunction) -> WaveMeasureSet:
    n = model.n
    pos, left, right = u.jumps()
    atoms = np.array([solve_strengths(model, left[a], right[a]) for a in range(pos.size)]).reshape(-1, n)
    lo, hi, piece = _cells(u)
    dens = np.zeros((lo.size, n))
    if lo.size:
        h = hi - lo
        # 5-point Gauss-Legendre average of l_i(u(x)) u'(x) over every cell
        xs = lo[:, None] + 0.5 * h[:, None] * (_GL5_X[None, :] + 1.0)
        slope = u.slope[piece]
        states = u.p[piece][:, None, :] + slope[:, None, :] * (xs - u.a[piece][:, None])[:, :, None]
        L = left_vectors_many(model, states.reshape(-1, n)).reshape(lo.size, 5, n, n)
        vals = np.einsum("cgij,cj->cgi", L, slope)
        dens = 0.5 * np.einsum("g,cgi->ci", _GL5_W, vals)
    mu = [SignedMeasure1D(pos, atoms[:, i], lo, hi, dens[:, i]) for i in range(n)]
    var = SignedMeasure1D(pos, np.linalg.norm(right - left, axis=1), lo, hi,
                          np.linalg.norm(u.slope[piece], axis=1) if lo.size else [])
    return WaveMeasureSet(mu, model.gnl, var)


def measures_Q_hat(wm: WaveMeasureSet) -> float:
    """``rho({x < y})``.  Same-family terms enter for GNL families only."""
    total = 0.0
    for i in range(wm.n):
        for j in range(i):
            total += half_plane_product(wm.absolute[i], wm.absolute[j])
        if wm.gnl[i]:
            mi, pi = wm.minus[i], wm.plus[i]
            total += half_plane_product(mi, mi) + half_plane_product(pi, mi) + half_plane_product(mi, pi)
    return total


def interaction_measure(model: FluxModel, u: BVFunction) -> float:
    return measures_Q_hat(wave_measures(model, u))


def measures_upsilon_hat(wm: WaveMeasureSet, consts: StabilityConstants) -> float:
    return sum(m.total_variation() for m in wm.mu) + consts.C0 * measures_Q_hat(wm)


def upsilon_hat(model: FluxModel, u: BVFunction, consts: StabilityConstants) -> float:
    return measures_upsilon_hat(wave_measures(model, u), consts)


def a_hat_many(wm, wmt, i, xs, q_sign):
    """Vectorized weight ``A_i`` over points ``xs`` with per-point sign of q."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    val = np.zeros(xs.size)
    for j in range(wm.n):
        if j > i:
            val += wm.absolute[j].closed_cdf(xs) + wmt.absolute[j].closed_cdf(xs)
        elif j < i:
            val += wm.absolute[j].open_tail(xs) + wmt.absolute[j].open_tail(xs)
    if wm.gnl[i]:
        neg = np.broadcast_to(np.asarray(q_sign) < 0, xs.shape)
        left_u = wm.absolute[i].closed_cdf(xs)
        right_u = wm.absolute[i].open_tail(xs)
        left_t = wmt.absolute[i].closed_cdf(xs)
        right_t = wmt.absolute[i].open_tail(xs)
        val += np.where(neg, left_u + right_t, right_u + left_t)
    return val


def a_hat(model, u, u_tilde, i, x, sign_of_q) -> float:
    wm = wave_measures(model, u)
    wmt = wave_measures(model, u_tilde)
    return float(a_hat_many(wm, wmt, i, [x], sign_of_q)[0])


# ---------------------------------------------------------------------------
# the functional


@dataclass
class _XiContext:
    model: FluxModel
    u: BVFunction
    ut: BVFunction
    wm: WaveMeasureSet
    wmt: WaveMeasureSet
    base: float
    kappa1: float

    def q(self, xs):
        xs = np.atleast_1d(xs)
        a = self.u(xs)
        b = self.ut(xs)
        out = np.zeros((xs.size, self.model.n))
        for k in range(xs.size):
            if not np.array_equal(a[k], b[k]):
                out[k] = solve_shock_strengths(self.model, a[k], b[k])
        return out

    def integrand(self, i, xs, q=None):
        q = self.q(xs)[:, i] if q is None else q
        w = self.base + self.kappa1 * a_hat_many(self.wm, self.wmt, i, xs, q)
        return np.abs(q) * w


def _gl(f, lo, hi):
    xs = lo + 0.5 * (hi - lo) * (_GL5_X + 1.0)
    return 0.5 * (hi - lo) * float(np.dot(_GL5_W, f(xs)))


def _adaptive(f, lo, hi, rtol=1e-8, atol=1e-15, depth=0, whole=None):
    whole = _gl(f, lo, hi) if whole is None else whole
    mid = 0.5 * (lo + hi)
    left = _gl(f, lo, mid)
    right = _gl(f, mid, hi)
    if abs(left + right - whole) <= max(rtol * abs(left + right), atol):
        return left + right
    if depth >= 40:
        raise QuadratureFailure(f"no convergence on [{lo}, {hi}]")
    return (_adaptive(f, lo, mid, rtol, atol, depth + 1, left)
            + _adaptive(f, mid, hi, rtol, atol, depth + 1, right))


def _sign_changes(ctx, i, lo, hi, probes=16):
    """Roots of q_i inside ``]lo, hi[``, located by sampling then brentq."""
    xs = np.linspace(lo, hi, probes + 1)[1:-1]
    # evaluate strictly inside, the function is smooth there
    xs = np.concatenate([[lo + 1e-12 * (hi - lo)], xs, [hi - 1e-12 * (hi - lo)]])
    vals = ctx.q(xs)[:, i]
    roots = []
    for k in range(xs.size - 1):
        if vals[k] == 0.0:
            continue
        if vals[k] * vals[k + 1] < 0:
            roots.append(brentq(lambda x: ctx.q(np.array([x]))[0, i], xs[k], xs[k + 1], xtol=1e-14))
    return roots


def xi_hat(model: FluxModel, u: BVFunction, u_tilde: BVFunction, consts: StabilityConstants,
           wm=None, wmt=None) -> float:
    wm = wave_measures(model, u) if wm is None else wm
    wmt = wave_measures(model, u_tilde) if wmt is None else wmt
    k1, k2 = consts.kappa1, consts.kappa2
    base = 1.0 + k1 * k2 * (measures_Q_hat(wm) + measures_Q_hat(wmt))
    ctx = _XiContext(model, u, u_tilde, wm, wmt, base, k1)
    pts = np.union1d(u.breakpoints(), u_tilde.breakpoints())
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        x0 = np.array([lo])
        flat = not (_sloped_on(u, lo, hi) or _sloped_on(u_tilde, lo, hi))
        if flat:
            q = ctx.q(x0)
            if not np.any(q):
                continue
            # no density on the interval: A_i only changes at its ends
            for i in range(model.n):
                if q[0, i] != 0.0:
                    total += (hi - lo) * float(ctx.integrand(i, x0, q[:, i])[0])
            continue
        for i in range(model.n):
            cuts = [lo] + _sign_changes(ctx, i, lo, hi) + [hi]
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                total += _adaptive(lambda xs: ctx.integrand(i, xs), c0, c1)
    return total


def _sloped_on(u: BVFunction, lo, hi) -> bool:
    mid = 0.5 * (lo + hi)
    k = np.searchsorted(u.a, mid, side="right") - 1
    return bool(k >= 0 and mid < u.b[k] and np.any(u.slope[k]))


# ---------------------------------------------------------------------------
# approximating sequence and error bounds


def _greedy_nodes(u: BVFunction, a: float, b: float, bound: float) -> np.ndarray:
    """Nodes at ``a``, ``b``, every jump, and wherever the continuous variation
    accumulated since the previous node reaches ``bound``."""
    rate = np.linalg.norm(u.slope, axis=1)
    knots = np.union1d(u.breakpoints(), [a, b])
    # cumulative continuous variation at the knots
    mids = 0.5 * (knots[:-1] + knots[1:])
    k = np.searchsorted(u.a, mids, side="right") - 1
    inside = (k >= 0) & (mids < u.b[np.maximum(k, 0)])
    seg = np.where(inside, rate[np.maximum(k, 0)], 0.0) * np.diff(knots)
    F = np.concatenate([[0.0], np.cumsum(seg)])
    forced = np.union1d(u.jumps()[0], [a, b])
    Ff = np.interp(forced, knots, F)
    nodes = [forced]
    for f0, f1 in zip(Ff[:-1], Ff[1:]):
        m = math.ceil((f1 - f0) / bound * (1.0 - 1e-12))
        if m > 10_000_000:
            raise MeshFailure("variation too concentrated for the mesh bound")
        if m <= 1:
            continue
        targets = f0 + bound * np.arange(1, m)
        j = np.clip(np.searchsorted(F, targets, side="left"), 1, F.size - 1)
        t = (targets - F[j - 1]) / np.where(seg[j - 1] > 0, seg[j - 1], 1.0)
        nodes.append(knots[j - 1] + t * (knots[j] - knots[j - 1]))
    return np.unique(np.concatenate(nodes))


def approx_sequence(u: BVFunction, nu: int) -> PiecewiseConstantFn:
    """Step functions ``v_nu`` sampling left/right limits on a variation-adapted mesh.

    Every open mesh cell carries at most ``1 / ((b - a) nu)`` of ``|Du|``; the
    nodes are placed greedily from the left.
    """
    if nu < 1:
        raise BadParameter("nu must be a positive integer")
    if u.pieces == 0:
        return PiecewiseConstantFn([], np.zeros((0, u.n)), u.background)
    lo, hi = u.support
    a = lo - 0.5
    b = max(hi + 0.5, a + 1.0)
    bound = 1.0 / ((b - a) * nu)
    x = _greedy_nodes(u, a, b, bound)
    y = np.concatenate([[x[0] - 1.0], 0.5 * (x[:-1] + x[1:]), [x[-1] + 1.0]])
    left = u.left_limit(x)
    right = u(x)
    # on [y_{a-1}, x_a) the value is u(x_a-), on [x_a, y_a) it is u(x_a+)
    bps = np.empty(2 * x.size + 1)
    bps[0::2] = y
    bps[1::2] = x
    vals = np.empty((2 * x.size, u.n))
    vals[0::2] = left
    vals[1::2] = right
    return PiecewiseConstantFn(bps, vals, u.background)


def diameter(u: BVFunction, a: float, b: float) -> float:
    """``diam(u(]a, b[))``; affine pieces attain extremes at their ends."""
    cand = [u(a), u.left_limit(b)]
    for c in u.breakpoints():
        if a < c < b:
            cand.extend([u.left_limit(c), u(c)])
    pts = np.array(cand)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.max(np.linalg.norm(diff, axis=2)))


def gap_bound(model: FluxModel, u: BVFunction, a: float, b: float, wm=None):
    """Both sides of ``|E_i(u(a+), u(b-)) - mu_i(]a,b[)| <= C diam * |mu|(]a,b[)``."""
    wm = wave_measures(model, u) if wm is None else wm
    e = solve_strengths(model, u(a), u.left_limit(b))
    lhs = max(abs(e[i] - wm.mu[i].interval(a, b)) for i in range(model.n))
    rhs = diameter(u, a, b) * wm.variation.interval(a, b)
    return {"lhs": float(lhs), "rhs": float(rhs)}


def taylor_remainder(model: FluxModel, u, u_tilde) -> float:
    """``max_i |E_i(u, u~) - l_i(u) (u~ - u)|``."""
    u = model.as_state(u)
    ut = model.as_state(u_tilde)
    e = solve_strengths(model, u, ut)
    lin = eigen_at(model, u).left_vecs @ (ut - u)
    return float(np.max(np.abs(e - lin)))
