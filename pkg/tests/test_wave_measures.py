import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypstab.acceptance import fitted_constants, loglog_slope, model_constants, sawtooth_sequence
from hypstab.flux_models import builtin
from hypstab.functionals_pcw import (PiecewiseConstantFn, StabilityConstants, big_A, glimm_total,
                                     interaction_potential, stability_phi)
from hypstab.generators import random_admissible_pcf, random_bv, random_pcf
from hypstab.wave_measures import (BVFunction, SignedMeasure1D, WaveMeasureSet, _greedy_nodes, a_hat, approx_sequence, gap_bound,
                                   half_plane_product, interaction_measure, measures_Q_hat, taylor_remainder,
                                   upsilon_hat, wave_measures, xi_hat)

UNIT = StabilityConstants(C0=4.0, kappa1=1.0, kappa2=1.0, delta=0.1)


def bv(model, rows):
    return BVFunction.from_pieces(model, rows)


def ramp_down(burgers):
    # 0 -> -0.1 on [0, 1], jump back to 0 at x = 1
    return bv(burgers, [(0.0, 1.0, -0.0, -0.1)])


# -- measures --------------------------------------------------------------------


def test_half_plane_product_atoms_and_cells():
    d0 = SignedMeasure1D([0.0], [1.0])
    d1 = SignedMeasure1D([1.0], [1.0])
    assert half_plane_product(d0, d1) == 1.0
    assert half_plane_product(d1, d0) == 0.0
    assert half_plane_product(d0, d0) == 0.0
    cell = SignedMeasure1D(lo=[0.0], hi=[1.0], dens=[1.0])
    assert half_plane_product(cell, cell) == pytest.approx(0.5)
    assert half_plane_product(cell, d1) == pytest.approx(1.0)
    assert half_plane_product(d1, cell) == 0.0


def test_measures_of_constant_and_steps(burgers):
    wm = wave_measures(burgers, BVFunction.from_pcf(PiecewiseConstantFn.constant(burgers)))
    assert wm.mu[0].total_variation() == 0
    wm = wave_measures(burgers, bv(burgers, [(0.0, 1.0, -0.1, 0.0)]))
    assert wm.mu[0].atom_x.tolist() == [0.0, 1.0]
    assert wm.mu[0].atom_m == pytest.approx([-0.1, 0.1])


def test_scalar_ramp_density(burgers):
    wm = wave_measures(burgers, bv(burgers, [(0.0, 1.0, 0.0, 0.1)]))
    assert np.allclose(wm.mu[0].dens, 0.1)
    assert wm.mu[0].interval(0.0, 1.0) == pytest.approx(0.1)


def test_jordan_consistency(psys, rng):
    wm = wave_measures(psys, random_bv(psys, rng, compressive=True))
    for m in wm.mu:
        p, n = m.positive(), m.negative()
        assert np.array_equal(p.atom_m - n.atom_m, m.atom_m) and np.array_equal(p.dens - n.dens, m.dens)
        assert np.array_equal(p.atom_m + n.atom_m, m.abs().atom_m)
        assert np.array_equal(p.dens + n.dens, m.abs().dens)


def test_generic_route_densities_agree(psys, rng):
    u = random_bv(psys, rng, compressive=True)
    a, b = wave_measures(psys, u), wave_measures(psys.with_generic(), u)
    for i in range(2):
        assert np.allclose(a.mu[i].dens, b.mu[i].dens, atol=1e-9)
        assert np.allclose(a.mu[i].atom_m, b.mu[i].atom_m, atol=1e-9)


# -- Q-hat, Upsilon-hat ------------------------------------------------------------


def test_interaction_measure_examples(burgers):
    single = SignedMeasure1D([0.0], [-0.2])
    assert measures_Q_hat(WaveMeasureSet([single], (True,), single.abs())) == 0
    step = bv(burgers, [(0.0, 1.0, -0.1, 0.0)])
    assert interaction_measure(burgers, step) == pytest.approx(0.01)
    # two positive atoms: 0 -> 0.05 -> 0.1, then the returning jump is dropped by a long plateau far away
    wm = wave_measures(burgers, bv(burgers, [(0.0, 1.0, 0.05, 0.0), (1.0, 2.0, 0.1, 0.0)]))
    pos_only = WaveMeasureSet([wm.mu[0].positive()], wm.gnl, wm.variation)
    assert measures_Q_hat(pos_only) == 0


def test_upsilon_hat_examples(burgers):
    zero = BVFunction.from_pcf(PiecewiseConstantFn.constant(burgers))
    assert upsilon_hat(burgers, zero, UNIT) == 0
    assert upsilon_hat(burgers, bv(burgers, [(0.0, 1.0, -0.1, 0.0)]), UNIT) == pytest.approx(0.24)


@given(st.integers(0, 100_000), st.sampled_from(["burgers", "p_system"]))
def test_hat_functionals_coincide_on_steps(seed, name):
    m = builtin(name)
    c = model_constants(name)
    u = random_pcf(m, np.random.default_rng(seed))
    ub = BVFunction.from_pcf(u)
    assert abs(interaction_measure(m, ub) - interaction_potential(m, u)) <= 1e-10
    assert abs(upsilon_hat(m, ub, c) - glimm_total(m, u, c)) <= 1e-10


# -- A-hat, Xi-hat ---------------------------------------------------------------------


def test_a_hat_examples(burgers, psys, linear_diag, rng):
    zero = BVFunction.from_pcf(PiecewiseConstantFn.constant(psys))
    assert a_hat(psys, zero, zero, 0, 0.3, -1) == 0
    v, w = random_pcf(psys, rng), random_pcf(psys, rng)
    for x in (-0.5, 0.7, 2.0, 3.3):
        for i in range(2):
            for q in (-1.0, 1.0):
                want = big_A(psys, v, i, q, x) + big_A(psys, w, i, -q, x)
                got = a_hat(psys, BVFunction.from_pcf(v), BVFunction.from_pcf(w), i, x, q)
                assert got == pytest.approx(want, abs=1e-12)
    u = bv(linear_diag, [(0.0, 1.0, [0.1, -0.05], [0.02, 0.01])])
    for x in (0.2, 0.9):
        assert a_hat(linear_diag, u, u, 1, x, -1) == a_hat(linear_diag, u, u, 1, x, 1)


def dense_xi_oracle(cells=100_000, k1=1.0, k2=1.0):
    """Riemann sum of |q| W for u = 0, u~ = ramp 0 -> -0.1 on [0, 1) then back to 0."""
    x = (np.arange(cells) + 0.5) / cells
    ut = -0.1 * x
    q = ut  # scalar: q is the state difference
    dvar = np.full(cells, 0.1 / cells)
    tail = np.cumsum(dvar[::-1])[::-1] - 0.5 * dvar + 0.1  # |mu~|(]x, inf[) incl. the final jump
    Q_t = 0.5 * 0.1 ** 2 + 0.1 * 0.1  # continuous-continuous and continuous-jump parts
    W = 1 + k1 * tail + k1 * k2 * Q_t
    return float(np.sum(np.abs(q) * W) / cells)


def test_xi_hat_ramp_against_dense_oracle(burgers):
    zero = BVFunction.from_pcf(PiecewiseConstantFn.constant(burgers))
    got = xi_hat(burgers, zero, ramp_down(burgers), UNIT)
    assert got == pytest.approx(dense_xi_oracle(), abs=1e-6)
    assert got == pytest.approx(0.1 * (1.215 / 2 - 0.1 / 3), abs=1e-12)


def test_xi_hat_self_zero(psys, rng):
    u = random_bv(psys, rng)
    assert xi_hat(psys, u, u, UNIT) == 0


@given(st.integers(0, 100_000), st.sampled_from(["burgers", "p_system"]))
def test_xi_hat_equals_phi_on_steps(seed, name):
    m = builtin(name)
    c = model_constants(name)
    rng = np.random.default_rng(seed)
    v, w = random_admissible_pcf(m, rng, c), random_admissible_pcf(m, rng, c)
    phi = stability_phi(m, v, w, c)
    assert abs(xi_hat(m, BVFunction.from_pcf(v), BVFunction.from_pcf(w), c) - phi) <= 1e-8 * max(1.0, phi)


# -- approximating sequence ------------------------------------------------------------------


def test_approx_sequence_of_zero_and_steps(burgers, psys, rng):
    zero = BVFunction.from_pcf(PiecewiseConstantFn.constant(psys))
    assert approx_sequence(zero, 10).is_constant
    u = random_pcf(psys, rng)
    ub = BVFunction.from_pcf(u)
    for nu in (10, 100):
        v = approx_sequence(ub, nu)
        assert set(u.breakpoints) <= set(v.breakpoints)
        assert v.l1_distance(u) <= 1e-14  # same atoms, plateaus only re-split
        assert np.allclose(wave_measures(psys, BVFunction.from_pcf(v)).mu[0].atom_m,
                           wave_measures(psys, ub).mu[0].atom_m)


def test_mesh_cells_respect_variation_bound(psys, rng):
    u = random_bv(psys, rng, amplitude=0.1, compressive=True)
    wm = wave_measures(psys, u)
    for nu in (5, 40):
        lo, hi = u.support
        a, b = lo - 0.5, max(hi + 0.5, lo + 0.5)
        bound = 1.0 / ((b - a) * nu)
        x = _greedy_nodes(u, a, b, bound)
        for x0, x1 in zip(x[:-1], x[1:]):
            assert wm.variation.interval(x0, x1) <= bound * (1 + 1e-9)


def test_scalar_ramp_rate(burgers):
    u = bv(burgers, [(0.0, 1.0, 0.05, -0.1)])
    q = interaction_measure(burgers, u)
    nus = (10, 20, 40, 80)
    d = [abs(interaction_measure(burgers, BVFunction.from_pcf(approx_sequence(u, nu))) - q) for nu in nus]
    assert loglog_slope(nus, d) <= -0.8


def test_interval_convergence(psys):
    u = random_bv(psys, np.random.default_rng(3), pieces=3, amplitude=0.1, compressive=True)
    wm = wave_measures(psys, u)
    intervals = np.sort(np.random.default_rng(4).uniform(-0.5, 3.5, (20, 2)), axis=1)
    scaled = []
    for nu in (10, 20, 40, 80):
        wn = wave_measures(psys, BVFunction.from_pcf(approx_sequence(u, nu)))
        err = max(abs(getattr(wn.mu[i], s)().interval(a, b) - getattr(wm.mu[i], s)().interval(a, b))
                  for i in range(2) for a, b in intervals for s in ("positive", "negative"))
        scaled.append(err * nu)
    assert max(scaled) <= 2 * scaled[0]


@pytest.mark.parametrize("name", ["burgers", "p_system"])
def test_sawtooth_lower_semicontinuity(name):
    m = builtin(name)
    c = model_constants(name)
    for k in range(3):
        rng = np.random.default_rng(k)
        u = random_bv(m, rng, pieces=2, amplitude=0.02)
        d = rng.normal(size=m.n)
        d /= np.linalg.norm(d)
        seq = [upsilon_hat(m, sawtooth_sequence(m, u, nu, d), c) for nu in (2, 4, 8, 16)]
        assert upsilon_hat(m, u, c) <= min(seq) + 1e-8


# -- gap bound, Taylor ---------------------------------------------------------------------------


def test_gap_bound_examples(burgers, psys, rng):
    u = random_bv(burgers, rng, amplitude=0.05)
    for a, b in ((-0.5, 0.7), (0.3, 2.9), (1.0, 1.5)):
        assert gap_bound(burgers, u, a, b)["lhs"] <= 1e-13
    zero = BVFunction.from_pcf(PiecewiseConstantFn.constant(psys))
    assert gap_bound(psys, zero, 0.0, 1.0) == {"lhs": 0.0, "rhs": 0.0}
    C = fitted_constants()["p_system"]["C_diam"]
    assert C <= 10
    for k in range(10):
        u = random_bv(psys, np.random.default_rng([77, k]), amplitude=0.03)
        a, b = np.sort(np.random.default_rng([78, k]).uniform(-0.2, 3.2, 2))
        g = gap_bound(psys, u, a, b)
        assert g["lhs"] <= C * g["rhs"] + 1e-13


def test_taylor_remainder_is_quadratic(psys):
    rng = np.random.default_rng(9)
    for _ in range(5):
        u = psys.origin + rng.uniform(-0.1, 0.1, 2)
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        h = np.array([0.04, 0.02, 0.01])
        rem = [taylor_remainder(psys, u, u + s * d) for s in h]
        assert loglog_slope(h, rem) >= 1.8
