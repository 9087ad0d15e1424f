"""Fit the slack constants used by the acceptance checks.

Every constant is the worst ratio seen on a fitting sample drawn from a
seed disjoint from the acceptance seed, times a factor-2 margin.  The output
is written once to ``fitted_constants.json`` and then frozen.
"""
from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .acceptance import DEFAULT_SEED, EPS_LIST, _rng, trajectory_study
from .calibration import calibrate, equivalence_constant
from .flux_models import builtin
from .functionals_pcw import big_A, interaction_potential, stability_phi
from .generators import random_admissible_pcf, random_bv
from .wave_measures import gap_bound, wave_measures

FIT_SEED = 7
MARGIN = 2.0
# floor for slack constants whose fitting sample shows no excess at all
SLACK_FLOOR = 0.1


def _margin(x, floor=0.0):
    return max(floor, MARGIN * float(x))


def fit_equivalence(model, consts, seed, samples=200):
    """Smallest C with Phi / L1 in [1/C, 2C] on the sample, with margin."""
    lo, hi = math.inf, 0.0
    for k in range(samples):
        rng = _rng(seed, 103, k)
        v = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        w = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(2, 8)), budget=0.05)
        d = v.l1_distance(w)
        if d == 0:
            continue
        r = stability_phi(model, v, w, consts) / d
        lo, hi = min(lo, r), max(hi, r)
    return _margin(max(1.0 / lo, hi / 2.0, 1.0)), lo, hi


def fit_coarsening(model, consts, seed, samples=200):
    """Fitted constants of the weight and Phi coarsening inequalities.

    Weights: ``A[u_c](q,x) + k2 Q(u_c) <= A[u](q,x) + k2 Q(u) + C |u_c(x) - u(x)|``.
    Phi: ``Phi(u_c, w_c) <= Phi(u, w) + C (|u_c - u|_1 + |w_c - w|_1)``.
    """
    from .acceptance import random_coarsening
    wr = pr = 0.0
    for k in range(samples):
        rng = _rng(seed, 107, k)
        u = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(3, 9)), budget=0.06)
        uc = random_coarsening(u, rng)
        Qu, Qc = interaction_potential(model, u), interaction_potential(model, uc)
        lo, hi = u.support
        for _ in range(5):
            x = rng.uniform(lo - 0.5, hi + 0.5)
            i = int(rng.integers(0, model.n))
            q = float(rng.choice([-1.0, 1.0]))
            excess = big_A(model, uc, i, q, x) + consts.kappa2 * Qc - big_A(model, u, i, q, x) - consts.kappa2 * Qu
            d = float(np.linalg.norm(uc(x) - u(x)))
            if d > 0:
                wr = max(wr, excess / d)
        w = random_admissible_pcf(model, rng, consts, jumps=int(rng.integers(3, 9)), budget=0.06)
        wc = random_coarsening(w, rng)
        den = uc.l1_distance(u) + wc.l1_distance(w)
        if den > 0:
            pr = max(pr, (stability_phi(model, uc, wc, consts) - stability_phi(model, u, w, consts)) / den)
    return _margin(wr, SLACK_FLOOR), _margin(pr, SLACK_FLOOR)


def fit_diam(model, seed, samples=20):
    worst = 0.0
    for k in range(samples):
        rng = _rng(seed, 109, k)
        u = random_bv(model, rng, pieces=3, amplitude=0.03)
        wm = wave_measures(model, u)
        lo, hi = u.support
        for _ in range(5):
            x0, x1 = np.sort(rng.uniform(lo - 0.2, hi + 0.2, 2))
            g = gap_bound(model, u, x0, x1, wm)
            if g["rhs"] > 1e-14:
                worst = max(worst, g["lhs"] / g["rhs"])
    return _margin(worst, SLACK_FLOOR)


def fit_trajectories(model, consts, seed, pairs=10):
    st = trajectory_study(model, consts, seed=seed, pairs=pairs)
    eps = np.array(st.eps)
    mono = float(np.max(st.excess / (eps[None, :] * (1.0 + st.T))))
    gap = float(np.max(st.gap_ratio / eps[None, :]))
    npb = float(np.max(st.nonphysical / eps[None, :]))
    return {"C_mono": _margin(mono, SLACK_FLOOR), "C_gap": _margin(gap, SLACK_FLOOR),
            "C_np": _margin(npb, SLACK_FLOOR), "raw": {"mono": mono, "gap": gap, "np": npb}}


def fit_all(seed=FIT_SEED, quick=False, echo=None) -> dict:
    if seed == DEFAULT_SEED:
        raise ValueError("fitting seed must differ from the acceptance seed")
    say = echo or (lambda *_: None)
    out = {"seed": seed, "margin": MARGIN, "version": __version__, "eps": list(EPS_LIST)}
    for name, model in (("burgers", builtin("burgers")), ("p_system", builtin("p_system", gamma=1.4))):
        cal = calibrate(model, delta=0.1, samples=500 if quick else 2000, seed=seed)
        consts = cal.constants()
        say(f"{name}: C0={cal.C0:.4g} kappa2={cal.kappa2:.4g}")
        C_equiv, lo, hi = fit_equivalence(model, consts, seed, samples=40 if quick else 200)
        say(f"{name}: Phi/L1 in [{lo:.4g}, {hi:.4g}] -> C_equiv={C_equiv:.4g}")
        entry = {
            "calibration": cal.to_json(),
            "C_equiv": C_equiv,
            "phi_ratio_fit": [lo, hi],
            "C_state_equiv": equivalence_constant(model, samples=200 if quick else 1000, seed=seed),
            "C_diam": fit_diam(model, seed, samples=5 if quick else 20),
        }
        entry["C_weights"], entry["C_reduce"] = fit_coarsening(model, consts, seed, samples=40 if quick else 200)
        say(f"{name}: C_diam={entry['C_diam']:.4g} C_weights={entry['C_weights']:.4g} "
            f"C_reduce={entry['C_reduce']:.4g}")
        if model.n > 1:
            traj = fit_trajectories(model, consts, seed, pairs=3 if quick else 10)
            entry.update(traj)
            say(f"{name}: C_mono={traj['C_mono']:.4g} C_gap={traj['C_gap']:.4g} C_np={traj['C_np']:.4g}")
        out[name] = entry
    return out


def write(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")

