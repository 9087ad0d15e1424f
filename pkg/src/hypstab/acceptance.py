"""The nine acceptance criteria as runnable functions.

Each ``criterion_k`` draws its own seeded data, measures the quantity under
test and returns a :class:`CriterionResult`.  Constants that the checks
compare against (calibrated Glimm constants, equivalence constants, fitted
slack constants) are read from the frozen table produced by
``scripts/fit_constants.py``; they are never refitted here.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .flux_models import builtin
from .front_tracking import ft_solve, phi_eps_compare
from .functionals_pcw import (PiecewiseConstantFn, StabilityConstants, glimm_total,
                              jump_strengths, sample_coarsen, stability_phi, table_Q)
from .generators import random_admissible_pcf, random_bv
from .riemann import psi_compose, shock_compose, solve_shock_strengths, solve_strengths
from .wave_measures import (BVFunction, approx_sequence, gap_bound, interaction_measure, measures_Q_hat,
                            taylor_remainder, wave_measures, xi_hat)

DEFAULT_SEED = 20240601
EPS_LIST = (0.02, 0.01, 0.005)


@dataclass
class CriterionResult:
    cid: int
    title: str
    passed: bool
    measured: dict
    bound: dict
    seconds: float = 0.0
    notes: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        bnd = ", ".join(f"{k}={_fmt(v)}" for k, v in self.bound.items())
        return f"[{tag}] criterion {self.cid}: {self.title} | {meas} | bound: {bnd} ({self.seconds:.1f}s)"

    def to_json(self):
        return {"criterion": self.cid, "title": self.title, "pass": self.passed,
                "measured": self.measured, "bound": self.bound, "seconds": self.seconds, "notes": self.notes}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def fitted_constants() -> dict:
    """Frozen constants written by the fitting script."""
    text = resources.files("hypstab").joinpath("fitted_constants.json").read_text()
    return json.loads(text)


def model_constants(name: str, fitted: dict = None) -> StabilityConstants:
    fitted = fitted_constants() if fitted is None else fitted
    c = fitted[name]["calibration"]
    return StabilityConstants(c["C0"], c["kappa1"], c["kappa2"], c["delta"])


def _models():
    return {"burgers": builtin("burgers"), "p_system": builtin("p_system", gamma=1.4)}


def _rng(seed, cid, extra=0):
    return np.random.default_rng([seed, cid, extra])


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _ball(model, rng, radius):
    d = rng.normal(size=model.n)
    d *= radius * rng.random() ** (1.0 / model.n) / np.linalg.norm(d)
    return model.origin + d


# ---------------------------------------------------------------------------


@_timed
def criterion_1(seed=DEFAULT_SEED, samples=1000) -> CriterionResult:
    """Round trips of E through Psi and of q through S."""
    worst_e, worst_q = {}, {}
    for name, model in _models().items():
        rng = _rng(seed, 1, len(name))
        we = wq = 0.0
        for _ in range(samples):
            um = _ball(model, rng, 0.2)
            sig = rng.uniform(-0.1, 0.1, size=model.n)
            we = max(we, float(np.max(np.abs(solve_strengths(model, um, psi_compose(model, sig, um)) - sig))))
            wq = max(wq, float(np.max(np.abs(solve_shock_strengths(model, um, shock_compose(model, sig, um)) - sig))))
        worst_e[name], worst_q[name] = we, wq
    err = max(list(worst_e.values()) + list(worst_q.values()))
    return CriterionResult(1, "Riemann round trip", err <= 1e-9,
                           {"max_err_E": max(worst_e.values()), "max_err_q": max(worst_q.values())},
                           {"tol": 1e-9})


def random_coarsening(u: PiecewiseConstantFn, rng):
    """Merge random runs of plateaus and sample one point in each merged interval."""
    bp = u.breakpoints
    m = bp.size - 1
    if m < 2:
        return u
    interior = np.arange(1, m)
    drop = rng.random(interior.size) < rng.uniform(0.2, 0.8)
    keep = np.concatenate([[0], interior[~drop], [m]])
    xs = bp[keep]
    ys = np.array([rng.uniform(a, b) for a, b in zip(xs[:-1], xs[1:])])
    return sample_coarsen(u, xs, ys)


@_timed
def criterion_2(seed=DEFAULT_SEED, samples=1000, fitted=None) -> CriterionResult:
    """Coarsening never increases Q or Upsilon."""
    fitted = fitted_constants() if fitted is None else fitted
    models = _models()
    viol_q = viol_u = 0
    worst = -math.inf
    for k in range(samples):
        name = "burgers" if k % 2 == 0 else "p_system"
        model = models[name]
        consts = model_constants(name, fitted)
        rng = _rng(seed, 2, k)
        u = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(3, 9)), budget=0.06)
        uc = random_coarsening(u, rng)
        tu, tc = jump_strengths(model, u), jump_strengths(model, uc)
        qu, qc = table_Q(tu), table_Q(tc)
        yu = float(np.abs(tu.strengths).sum()) + consts.C0 * qu
        yc = float(np.abs(tc.strengths).sum()) + consts.C0 * qc
        viol_q += qc > qu + 1e-10
        viol_u += yc > yu + 1e-10
        worst = max(worst, qc - qu, yc - yu)
    return CriterionResult(2, "coarsening monotonicity", viol_q == 0 and viol_u == 0,
                           {"violations_Q": int(viol_q), "violations_Upsilon": int(viol_u), "max_increase": worst},
                           {"violations": 0, "slack": 1e-10})


@_timed
def criterion_3(seed=DEFAULT_SEED, samples=500, fitted=None) -> CriterionResult:
    """Phi / L1 stays in [1/C, 2C]; Phi(u, u) = 0."""
    fitted = fitted_constants() if fitted is None else fitted
    models = _models()
    lo_ratio, hi_ratio, zero_fail = {}, {}, 0
    ok = True
    for k in range(samples):
        name = "burgers" if k % 2 == 0 else "p_system"
        model = models[name]
        consts = model_constants(name, fitted)
        C = fitted[name]["C_equiv"]
        rng = _rng(seed, 3, k)
        v = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        w = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        d = v.l1_distance(w)
        if d == 0:
            continue
        r = stability_phi(model, v, w, consts) / d
        lo_ratio[name] = min(lo_ratio.get(name, math.inf), r)
        hi_ratio[name] = max(hi_ratio.get(name, -math.inf), r)
        ok &= 1.0 / C <= r <= 2.0 * C
        zero_fail += stability_phi(model, v, v, consts) != 0.0
    measured = {f"ratio_{n}": [lo_ratio[n], hi_ratio[n]] for n in lo_ratio}
    measured["phi_uu_nonzero"] = int(zero_fail)
    bound = {f"C_{n}": fitted[n]["C_equiv"] for n in lo_ratio}
    return CriterionResult(3, "L1 equivalence", bool(ok) and zero_fail == 0, measured, bound)


def resolved_bv(model, rng, nu_min, amplitude=0.1, tries=200):
    """Compressive affine-piece data whose every sloped piece is refined by the coarsest mesh.

    A piece carrying less variation than the mesh bound gets no interior
    node, so its contribution to the error stays frozen until the bound drops
    below it; we require twice the bound at ``nu_min``.
    """
    for _ in range(tries):
        u = random_bv(model, rng, pieces=int(rng.integers(1, 4)), amplitude=amplitude, compressive=True)
        lo, hi = u.support
        width = max(hi - lo + 1.0, 1.0)
        mass = np.linalg.norm(u.slope, axis=1) * (u.b - u.a)
        if np.all(mass >= 2.0 / (width * nu_min)) and all(model.in_domain(x) for x in u.end_values()):
            return u
    raise RuntimeError("could not draw resolved data")


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


@_timed
def criterion_4(seed=DEFAULT_SEED, pairs=200, bv_inputs=50, fitted=None) -> CriterionResult:
    """Xi-hat equals Phi on steps; Q-hat of the approximating sequence converges like 1/nu."""
    fitted = fitted_constants() if fitted is None else fitted
    models = _models()
    worst_rel = 0.0
    for k in range(pairs):
        name = "burgers" if k % 2 == 0 else "p_system"
        model = models[name]
        consts = model_constants(name, fitted)
        rng = _rng(seed, 4, k)
        v = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        w = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        phi = stability_phi(model, v, w, consts)
        xi = xi_hat(model, BVFunction.from_pcf(v), BVFunction.from_pcf(w), consts)
        worst_rel = max(worst_rel, abs(xi - phi) / max(1.0, phi))
    nus = (10, 20, 40, 80)
    slopes = []
    for k in range(bv_inputs):
        name = "burgers" if k % 2 == 0 else "p_system"
        model = models[name]
        rng = _rng(seed, 4, 10_000 + k)
        u = resolved_bv(model, rng, min(nus))
        qu = interaction_measure(model, u)
        diffs = [abs(measures_Q_hat(wave_measures(model, BVFunction.from_pcf(approx_sequence(u, nu)))) - qu)
                 for nu in nus]
        slopes.append(loglog_slope(nus, np.maximum(diffs, 1e-300)))
    ok = worst_rel <= 1e-8 and max(slopes) <= -0.8
    return CriterionResult(4, "coincidence of the two constructions", ok,
                           {"max_rel_xi_minus_phi": worst_rel, "worst_slope": max(slopes),
                            "median_slope": float(np.median(slopes))},
                           {"rel_tol": 1e-8, "slope": -0.8})


# ---------------------------------------------------------------------------
# trajectories (criteria 5, 6, 7 share the same runs)


@dataclass
class TrajectoryStudy:
    eps: tuple
    excess: np.ndarray      # pairs x eps: max over t1 <= t2 of [Phi(t2) - Phi(t1)]+
    gap_ratio: np.ndarray   # pairs x eps: max over t of |Phi - Phi_eps| / L1
    gap_at_zero_l1: float   # largest |Phi - Phi_eps| where the snapshots coincide
    upsilon_increase: float
    nonphysical: np.ndarray
    events: np.ndarray
    T: float

    def gap_violations(self, C_gap: float) -> int:
        eps = np.array(self.eps)[None, :]
        return int(np.sum(self.gap_ratio > C_gap * eps)) + int(self.gap_at_zero_l1 > 0)


_STUDY_CACHE = {}


def trajectory_study(model, consts: StabilityConstants, seed=DEFAULT_SEED, pairs=20, T=1.0, eps_list=EPS_LIST,
                     samples=21, threshold=None) -> TrajectoryStudy:
    """Evolve seeded pairs and collect the monotonicity, gap and decay data.

    ``threshold`` is passed to :func:`ft_solve` as a callable of eps (or
    None for the default, threshold = eps).
    """
    key = (id(model), consts, seed, pairs, T, tuple(eps_list), samples, threshold)
    if key in _STUDY_CACHE:
        return _STUDY_CACHE[key]
    times = np.linspace(0.0, T, samples)
    E = np.zeros((pairs, len(eps_list)))
    G = np.zeros_like(E)
    NP = np.zeros_like(E)
    EV = np.zeros_like(E, dtype=int)
    g0 = 0.0
    dU = -math.inf
    for k in range(pairs):
        rng = _rng(seed, 5, k)
        v = random_admissible_pcf(model, rng, consts, jumps=6, budget=0.05)
        w = random_admissible_pcf(model, rng, consts, jumps=6, budget=0.05)
        for e, eps in enumerate(eps_list):
            thr = None if threshold is None else threshold(eps)
            a = ft_solve(model, v, eps, T, consts, threshold=thr)
            b = ft_solve(model, w, eps, T, consts, threshold=thr)
            phis = np.empty(times.size)
            for m, t in enumerate(times):
                cmp = phi_eps_compare(model, a, b, consts, t)
                phis[m] = cmp["phi"]
                if cmp["l1"] > 0:
                    G[k, e] = max(G[k, e], cmp["gap"] / cmp["l1"])
                else:
                    g0 = max(g0, cmp["gap"])
            run_max = np.maximum.accumulate(phis[::-1])[::-1]
            E[k, e] = max(0.0, float(np.max(run_max - phis)))
            NP[k, e] = max(a.max_np, b.max_np)
            EV[k, e] = len(a.events) + len(b.events)
            for tr in (a, b):
                if tr.diag_upsilon.size > 1:
                    dU = max(dU, float(np.max(np.diff(tr.diag_upsilon))))
    study = TrajectoryStudy(tuple(eps_list), E, G, g0, dU, NP, EV, T)
    _STUDY_CACHE[key] = study
    return study


def _acceptance_study(seed, fitted):
    return trajectory_study(builtin("p_system", gamma=1.4), model_constants("p_system", fitted), seed)


def _halving_ratios(values):
    """Ratios v(eps/2) / v(eps) of aggregated values; None where both vanish."""
    out = []
    for a, b in zip(values[:-1], values[1:]):
        out.append(None if a == 0 and b == 0 else (b / a if a > 0 else math.inf))
    return out


@_timed
def criterion_5(seed=DEFAULT_SEED, fitted=None, study=None) -> CriterionResult:
    """Phi is nonincreasing along evolved pairs up to a slack linear in eps."""
    fitted = fitted_constants() if fitted is None else fitted
    st = _acceptance_study(seed, fitted) if study is None else study
    C = fitted["p_system"]["C_mono"]
    eps = np.array(st.eps)
    bound_ok = bool(np.all(st.excess <= C * eps[None, :] * (1 + st.T)))
    agg = st.excess.sum(axis=0)
    pos = agg > 0
    if not pos.any():
        slope, slope_ok = None, True
    elif pos.sum() == 1:
        # a single positive level must be the coarsest one to count as decay
        slope, slope_ok = None, bool(pos[0])
    else:
        slope = loglog_slope(eps[pos], agg[pos])
        slope_ok = slope >= 0.8 and bool(np.all(np.diff(pos.astype(int)) <= 0))
    return CriterionResult(5, "monotonicity along trajectories", bound_ok and slope_ok,
                           {"max_excess": [float(x) for x in st.excess.max(axis=0)],
                            "pairs_with_excess": [int(x) for x in (st.excess > 0).sum(axis=0)],
                            "loglog_slope": slope if slope is not None else "n/a"},
                           {"C_mono": C, "slope": 0.8})


@_timed
def criterion_6(seed=DEFAULT_SEED, fitted=None, study=None) -> CriterionResult:
    """|Phi - Phi_eps| <= C eps L1 on every pair; the aggregated gap halves with eps."""
    fitted = fitted_constants() if fitted is None else fitted
    st = _acceptance_study(seed, fitted) if study is None else study
    agg = st.gap_ratio.sum(axis=0)
    ratios = _halving_ratios(agg)
    halves = all(r is None or 0.375 <= r <= 0.625 for r in ratios)
    viol = st.gap_violations(fitted["p_system"]["C_gap"])
    bound_ok = viol == 0
    return CriterionResult(6, "Phi versus Phi_eps gap", bound_ok and halves,
                           {"bound_violations": viol,
                            "aggregated_gap_over_L1": [float(x) for x in agg],
                            "halving_ratios": ["n/a" if r is None else float(r) for r in ratios]},
                           {"C_gap": fitted["p_system"]["C_gap"], "ratio": [0.375, 0.625]})


@_timed
def criterion_7(seed=DEFAULT_SEED, fitted=None, study=None) -> CriterionResult:
    """Upsilon_eps never increases at an interaction."""
    st = _acceptance_study(seed, fitted) if study is None else study
    return CriterionResult(7, "Glimm decay", st.upsilon_increase <= 1e-10,
                           {"max_increase": st.upsilon_increase, "events": int(st.events.sum())},
                           {"slack": 1e-10})


# ---------------------------------------------------------------------------


def bump_sequence(model, u: PiecewiseConstantFn, nu: int, direction, amplitude=0.01):
    """Insert in each plateau a narrow sub-plateau offset by ``amplitude / nu``."""
    bps, vals = [], []
    for a, b, val in zip(u.breakpoints[:-1], u.breakpoints[1:], u.values):
        m = 0.5 * (a + b)
        w = (b - a) / (2.0 * nu)
        bps.extend([a, m - w, m + w])
        vals.extend([val, val + amplitude / nu * direction, val])
    bps.append(u.breakpoints[-1])
    return PiecewiseConstantFn(bps, np.array(vals), u.background)


def sawtooth_sequence(model, u: BVFunction, nu: int, direction, amplitude=0.05):
    """``u`` plus a continuous sawtooth with ``nu`` teeth per piece and height ``amplitude / nu``."""
    rows = []
    for a, b, p, s in zip(u.a, u.b, u.p, u.slope):
        knots = np.linspace(a, b, 2 * nu + 1)
        bump = np.zeros(knots.size)
        bump[1::2] = amplitude / nu
        vals = p + s * (knots - a)[:, None] + bump[:, None] * direction
        for k in range(2 * nu):
            h = knots[k + 1] - knots[k]
            rows.append((knots[k], knots[k + 1], vals[k], (vals[k + 1] - vals[k]) / h))
    return BVFunction(*[np.array(c) for c in zip(*rows)], u.background) if rows else u


@_timed
def criterion_8(seed=DEFAULT_SEED, sequences=10, fitted=None) -> CriterionResult:
    """Lower semicontinuity of Upsilon (steps) and Q-hat (BV) along oscillating sequences."""
    fitted = fitted_constants() if fitted is None else fitted
    models = _models()
    nus = (2, 4, 8, 16)
    worst_u = worst_q = -math.inf
    for k in range(sequences):
        name = "burgers" if k % 2 == 0 else "p_system"
        model = models[name]
        consts = model_constants(name, fitted)
        rng = _rng(seed, 8, k)
        d = rng.normal(size=model.n)
        d /= np.linalg.norm(d)
        u = random_admissible_pcf(model, rng, consts, jumps=5, budget=0.04)
        yu = glimm_total(model, u, consts)
        worst_u = max(worst_u, yu - min(glimm_total(model, bump_sequence(model, u, nu, d), consts) for nu in nus))
        ub = random_bv(model, rng, pieces=2, amplitude=0.02)
        qu = interaction_measure(model, ub)
        worst_q = max(worst_q, qu - min(interaction_measure(model, sawtooth_sequence(model, ub, nu, d))
                                        for nu in nus))
    ok = worst_u <= 1e-8 and worst_q <= 1e-8
    return CriterionResult(8, "lower semicontinuity", ok,
                           {"max_Upsilon_u_minus_min_seq": worst_u, "max_Qhat_u_minus_min_seq": worst_q},
                           {"slack": 1e-8})


@_timed
def criterion_9(seed=DEFAULT_SEED, samples=20, fitted=None) -> CriterionResult:
    """Scalar gap bound is exact; the Taylor remainder of E is quadratic."""
    fitted = fitted_constants() if fitted is None else fitted
    models = _models()
    b = models["burgers"]
    scalar = 0.0
    for k in range(samples):
        rng = _rng(seed, 9, k)
        u = random_bv(b, rng, pieces=3, amplitude=0.05)
        wm = wave_measures(b, u)
        lo, hi = u.support
        for _ in range(5):
            x0, x1 = np.sort(rng.uniform(lo - 0.2, hi + 0.2, 2))
            scalar = max(scalar, gap_bound(b, u, x0, x1, wm)["lhs"])
    p = models["p_system"]
    dists = np.array([0.04, 0.02, 0.01])
    exps = []
    for k in range(samples):
        rng = _rng(seed, 9, 1000 + k)
        u = _ball(p, rng, 0.2)
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        rem = [taylor_remainder(p, u, u + h * d) for h in dists]
        exps.append(loglog_slope(dists, rem))
    C_diam = fitted["p_system"]["C_diam"]
    diam_viol = 0
    for k in range(samples):
        rng = _rng(seed, 9, 2000 + k)
        u = random_bv(p, rng, pieces=3, amplitude=0.03)
        wm = wave_measures(p, u)
        lo, hi = u.support
        for _ in range(5):
            x0, x1 = np.sort(rng.uniform(lo - 0.2, hi + 0.2, 2))
            g = gap_bound(p, u, x0, x1, wm)
            diam_viol += g["lhs"] > C_diam * g["rhs"] + 1e-13
    ok = scalar <= 1e-13 and min(exps) >= 1.8 and diam_viol == 0
    return CriterionResult(9, "gap bound and Taylor exponent", ok,
                           {"scalar_lhs_max": scalar, "min_taylor_exponent": min(exps), "diam_violations": diam_viol},
                           {"scalar_tol": 1e-13, "exponent": 1.8, "C_diam": C_diam})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def run_all(seed=DEFAULT_SEED, only=None, echo=print):
    results = []
    for cid, fn in CRITERIA.items():
        if only and cid not in only:
            continue
        res = fn(seed=seed)
        if echo:
            echo(res.line())
        results.append(res)
    return results
