"""Seeded random data: step functions, affine-piece BV functions, pairs."""
from __future__ import annotations

import numpy as np

from .flux_models import FluxModel
from .functionals_pcw import PiecewiseConstantFn, StabilityConstants, glimm_total
from .riemann import psi_compose
from .wave_measures import BVFunction


def random_strengths(rng, n, jumps, budget):
    """``jumps`` x ``n`` strengths with total absolute value ``budget``."""
    s = rng.uniform(-1.0, 1.0, size=(jumps, n))
    s[rng.random(size=s.shape) < 0.3] = 0.0
    tot = np.abs(s).sum()
    if tot == 0:
        s[0, 0] = 1.0
        tot = 1.0
    return s * (budget / tot)


def random_pcf(model: FluxModel, rng, jumps=6, budget=0.05, span=(0.0, 4.0)) -> PiecewiseConstantFn:
    """Step function built by chaining Lax curves from the background state.

    The last jump returns to the background, so the first ``jumps - 1`` jumps
    carry roughly ``budget`` of wave strength.
    """
    jumps = max(2, int(jumps))
    xs = np.sort(rng.uniform(*span, size=jumps))
    while np.any(np.diff(xs) <= 1e-6):
        xs = np.sort(rng.uniform(*span, size=jumps))
    strengths = random_strengths(rng, model.n, jumps - 1, budget)
    vals = []
    u = model.origin.copy()
    for s in strengths:
        u = psi_compose(model, s, u)
        vals.append(u)
    return PiecewiseConstantFn.from_steps(model, xs, np.array(vals))


def random_admissible_pcf(model, rng, consts: StabilityConstants, jumps=6, budget=0.04, span=(0.0, 4.0),
                          tries=50) -> PiecewiseConstantFn:
    """Random step function with ``Upsilon < consts.delta``."""
    for _ in range(tries):
        u = random_pcf(model, rng, jumps, budget, span)
        if glimm_total(model, u, consts) < consts.delta:
            return u
        budget *= 0.8
    raise RuntimeError("could not draw admissible data")


def random_bv(model: FluxModel, rng, pieces=3, amplitude=0.03, span=(0.0, 3.0), compressive=False) -> BVFunction:
    """Affine pieces with random values and slopes inside a small ball.

    ``compressive`` forces negative slopes in every GNL-relevant component so
    that the wave measures carry same-family interaction mass.
    """
    n = model.n
    edges = np.sort(rng.uniform(*span, size=pieces + 1))
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        p = model.origin + rng.uniform(-amplitude, amplitude, n)
        end = model.origin + rng.uniform(-amplitude, amplitude, n)
        slope = (end - p) / (b - a)
        if compressive:
            slope = -np.abs(slope)
            slope[slope == 0] = -amplitude
        rows.append((a, b, p, slope))
    return BVFunction.from_pieces(model, rows)
