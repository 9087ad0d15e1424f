"""Empirical calibration of the functional constants.

The Glimm constant C0 and the weight constant kappa2 are set from a sweep of
binary interactions: for each approaching pair the outgoing waves are
computed with the accurate solver, the simplified solver, and (when one front
is non-physical) the crossing rule.  With ``I = |sigma sigma'|`` the
interaction amount, C0 is twice the largest ``(V_out - V_in) / I`` and kappa2
twice the largest increase of per-family strength over ``I``.

The equivalence constant relating ``sum_i |q_i|`` to ``|u~ - u|`` is fitted
from random state pairs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .flux_models import FluxModel
from .front_tracking import Front, _resolve, nonphysical_speed
from .functionals_pcw import StabilityConstants
from .riemann import NONPHYSICAL, RAREFACTION, SHOCK, CONTACT, _lax, _shock, solve_shock_strengths


@dataclass
class CalibrationResult:
    C0: float
    kappa1: float
    kappa2: float
    delta: float
    samples: int
    max_dv_ratio: float
    max_strength_ratio: float
    seed: int

    def constants(self) -> StabilityConstants:
        return StabilityConstants(self.C0, self.kappa1, self.kappa2, self.delta)

    def to_json(self):
        return asdict(self)


def _ball_state(model, rng, radius):
    d = rng.normal(size=model.n)
    d *= radius * rng.random() ** (1.0 / model.n) / np.linalg.norm(d)
    return model.origin + d


def _front(model, i, sigma, left):
    if model.gnl[i] and sigma < 0:
        right, s = _shock(model, i, sigma, left)
        return Front(0.0, s, i, sigma, SHOCK, left, right, 0.0)
    right = _lax(model, i, sigma, left)
    return Front(0.0, 0.0, i, sigma, RAREFACTION if model.gnl[i] else CONTACT, left, right, 0.0)


def _family_totals(model, fronts):
    tot = np.zeros(model.n + 1)
    for f in fronts:
        if f.family == NONPHYSICAL:
            tot[model.n] += f.strength
        else:
            tot[f.family] += f.strength
    return tot


def _approaching_pair(model, rng, size):
    """Families (i, j) and strengths of an approaching left/right pair."""
    while True:
        i, j = sorted(rng.integers(0, model.n, size=2), reverse=True)
        s1, s2 = rng.uniform(-size, size, size=2)
        if i > j or (model.gnl[i] and min(s1, s2) < 0):
            return int(i), int(j), float(s1), float(s2)


def interaction_sweep(model: FluxModel, delta: float, samples: int, seed: int, eps: float = 0.01):
    """Ratios ``(dV / I, strength change / I)`` over random binary interactions."""
    rng = np.random.default_rng(seed)
    lam_hat = nonphysical_speed(model)
    dv, ds = [], []
    if model.n == 1 and not model.gnl[0]:
        return np.zeros(0), np.zeros(0)  # a single LD family has no approaching pairs
    for _ in range(samples):
        uL = _ball_state(model, rng, 0.5 * model.domain_radius)
        size = 0.5 * delta
        kind = rng.integers(0, 3)
        if kind < 2:
            i, j, s1, s2 = _approaching_pair(model, rng, size)
            a = _front(model, i, s1, uL)
            b = _front(model, j, s2, a.right)
            amount = abs(s1 * s2)
            threshold = 0.0 if kind == 0 else np.inf
        else:
            # non-physical front meeting a physical one
            j = int(rng.integers(0, model.n))
            s2 = float(rng.uniform(-size, size))
            jump = rng.normal(size=model.n)
            jump *= rng.uniform(0, 0.1 * size) / np.linalg.norm(jump)
            uM = uL + jump
            a = Front(0.0, lam_hat, NONPHYSICAL, float(np.linalg.norm(jump)), "nonphysical", uL, uM, 0.0)
            b = _front(model, j, s2, uM)
            amount = a.strength * abs(s2)
            threshold = np.inf
        if amount < 1e-12:
            continue
        out, _ = _resolve(model, a, b, 0.0, 0.0, eps, threshold, lam_hat)
        v_in = abs(a.strength) + abs(b.strength)
        v_out = sum(abs(f.strength) for f in out)
        dv.append((v_out - v_in) / amount)
        before = _family_totals(model, [a, b])
        after = _family_totals(model, out)
        ds.append(float(np.sum(np.abs(after - before))) / amount)
    return np.array(dv), np.array(ds)


def calibrate(model: FluxModel, delta: float = 0.1, samples: int = 2000, seed: int = 0,
              kappa1: float = 1.0) -> CalibrationResult:
    dv, ds = interaction_sweep(model, delta, samples, seed)
    max_dv = float(np.max(dv)) if dv.size else 0.0
    max_ds = float(np.max(ds)) if ds.size else 0.0
    C0 = max(4.0, 2.0 * max_dv)
    kappa2 = max(1.0, 2.0 * max_ds)
    return CalibrationResult(C0, kappa1, kappa2, delta, int(dv.size), max_dv, max_ds, seed)


def equivalence_constant(model: FluxModel, samples: int = 2000, seed: int = 0, radius: float = None) -> float:
    """``C`` with ``|du|/C <= sum_i |q_i| <= C |du|`` on sampled pairs, with a factor-2 margin on the excess."""
    rng = np.random.default_rng(seed)
    radius = 0.5 * model.domain_radius if radius is None else radius
    worst = 1.0
    for _ in range(samples):
        u = _ball_state(model, rng, radius)
        v = _ball_state(model, rng, radius)
        d = float(np.linalg.norm(v - u))
        if d < 1e-9:
            continue
        s = float(np.sum(np.abs(solve_shock_strengths(model, u, v))))
        worst = max(worst, s / d, d / s)
    return 1.0 + 2.0 * (worst - 1.0)
