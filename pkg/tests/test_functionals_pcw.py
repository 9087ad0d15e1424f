import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypstab.acceptance import fitted_constants, model_constants, random_coarsening
from hypstab.errors import BadParameter
from hypstab.flux_models import builtin
from hypstab.functionals_pcw import (JumpTable, PiecewiseConstantFn, StabilityConstants, _side_sums_at, big_A,
                                     glimm_total, in_domain_star, interaction_potential, jump_strengths,
                                     linear_functional, pointwise_q, sample_coarsen, side_sums, stability_phi,
                                     stability_weight, table_big_A, table_Q, table_Q_bruteforce, table_V)
from hypstab.generators import random_admissible_pcf, random_pcf
from hypstab.riemann import solve_strengths

UNIT = StabilityConstants(C0=4.0, kappa1=1.0, kappa2=1.0, delta=0.1)
G1 = (True,)
G2 = (True, True)


def step(model, bp, vals):
    return PiecewiseConstantFn.from_steps(model, bp, np.asarray(vals, float).reshape(-1, model.n))


# -- the step function type -----------------------------------------------


def test_pcf_basics(burgers):
    u = step(burgers, [0, 1, 2], [[-0.1], [0.2]])
    assert u(0.0)[0] == -0.1 and u(1.0)[0] == 0.2 and u(2.0)[0] == 0.0
    assert u.left_limit(1.0)[0] == -0.1
    assert u.l1_distance(PiecewiseConstantFn.constant(burgers)) == pytest.approx(0.3)
    assert PiecewiseConstantFn.constant(burgers).is_constant


def test_pcf_canonical_merges(burgers):
    u = step(burgers, [0, 1, 2, 3], [[0.1], [0.1 + 1e-15], [0.0]])
    assert u.breakpoints.tolist() == [0.0, 2.0]
    with pytest.raises(BadParameter):
        step(burgers, [0, 0], [[0.1]])


def test_pcf_json_round_trip(psys, rng):
    u = random_pcf(psys, rng)
    v = PiecewiseConstantFn.from_json(psys, u.to_json())
    assert np.array_equal(u.values, v.values) and np.array_equal(u.breakpoints, v.breakpoints)


# -- jump tables, V, Q, Upsilon -----------------------------------------------


def test_jump_strengths(burgers, psys):
    assert len(jump_strengths(burgers, PiecewiseConstantFn.constant(burgers))) == 0
    t = jump_strengths(burgers, step(burgers, [0, 1], [[-0.2]]))
    assert t.strengths[0, 0] == pytest.approx(-0.2)
    u = step(psys, [0, 1, 2], [[1.02, 0.01], [0.99, -0.02]])
    t = jump_strengths(psys, u)
    states = [psys.origin, u.values[0], u.values[1], psys.origin]
    for a in range(3):
        assert np.allclose(t.strengths[a], solve_strengths(psys, states[a], states[a + 1]), atol=1e-15)


def test_linear_functional_examples(burgers):
    assert linear_functional(burgers, PiecewiseConstantFn.constant(burgers)) == 0
    assert table_V(JumpTable(np.array([0.0, 1.0]), np.array([[-0.2], [0.1]]), G1)) == pytest.approx(0.3)
    assert table_V(JumpTable(np.array([0.0]), np.array([[-0.03, 0.04]]), G2)) == pytest.approx(0.07)


def test_interaction_potential_examples():
    assert table_Q(JumpTable(np.array([0.0, 1.0]), np.array([[0.1], [0.2]]), G1)) == 0
    assert table_Q(JumpTable(np.array([0.0, 1.0]), np.array([[-0.1], [-0.2]]), G1)) == pytest.approx(0.02)
    t = JumpTable(np.array([0.0, 1.0]), np.array([[0.0, 0.1], [0.3, 0.0]]), G2)
    assert table_Q(t) == pytest.approx(0.03)
    # the reverse order does not approach
    t = JumpTable(np.array([0.0, 1.0]), np.array([[0.3, 0.0], [0.0, 0.1]]), G2)
    assert table_Q(t) == 0


def test_glimm_total_and_membership(burgers):
    t = JumpTable(np.array([0.0, 1.0]), np.array([[-0.1], [-0.2]]), G1)
    assert table_V(t) + 4.0 * table_Q(t) == pytest.approx(0.38)
    u = step(burgers, [0, 1], [[-0.1]])
    assert glimm_total(burgers, u, UNIT) == pytest.approx(0.24)
    assert in_domain_star(burgers, u, StabilityConstants(4, 1, 1, 0.3))
    assert not in_domain_star(burgers, u, StabilityConstants(4, 1, 1, 0.2))
    assert glimm_total(burgers, PiecewiseConstantFn.constant(burgers), UNIT) == 0


@given(st.integers(1, 30), st.integers(1, 3), st.integers(0, 10_000))
def test_fast_Q_matches_bruteforce(m, n, seed):
    rng = np.random.default_rng(seed)
    gnl = tuple(bool(b) for b in rng.integers(0, 2, n))
    t = JumpTable(np.sort(rng.uniform(0, 1, m)), rng.uniform(-1, 1, (m, n)) * (rng.random((m, n)) < 0.6), gnl)
    assert table_Q(t) == pytest.approx(table_Q_bruteforce(t), rel=1e-12, abs=1e-15)


# -- weights -----------------------------------------------------------------


def test_side_sums_examples(burgers):
    t = JumpTable(np.array([0.0]), np.array([[-0.2]]), G1)
    minus, plus = _side_sums_at(t, [0.0, -1.0])
    assert minus[0][0] == pytest.approx(0.2) and plus[0][0] == 0
    assert minus[1][0] == 0 and plus[1][0] == pytest.approx(0.2)
    s = side_sums(burgers, PiecewiseConstantFn.constant(burgers), 0.3)
    assert np.all(s["minus"] == 0) and np.all(s["plus"] == 0)


def test_big_A_examples(linear_diag):
    t = JumpTable(np.array([0.0]), np.array([[-0.2]]), G1)
    assert table_big_A(t, 0, -0.1, 0.5) == pytest.approx(0.2)
    assert table_big_A(t, 0, 0.1, 0.5) == 0
    # q = 0 takes the A+ branch
    assert table_big_A(t, 0, 0.0, 0.5) == 0
    u = step(linear_diag, [0, 1, 2], [[0.1, -0.05], [0.02, 0.03]])
    for x in (-1.0, 0.5, 1.5, 3.0):
        assert big_A(linear_diag, u, 0, -1.0, x) == big_A(linear_diag, u, 0, 1.0, x)


def test_stability_weight_examples(burgers):
    zero = PiecewiseConstantFn.constant(burgers)
    assert stability_weight(burgers, zero, zero, 0, 0.3, 0.0, UNIT) == 1.0
    vt = step(burgers, [0, 1], [[-0.1]])
    assert stability_weight(burgers, zero, vt, 0, -0.1, 0.5, UNIT) == pytest.approx(1.11)
    assert stability_weight(burgers, vt, zero, 0, 0.1, 0.5, UNIT) == pytest.approx(1.11)


@given(st.integers(0, 10_000), st.floats(-1, 5), st.integers(0, 1), st.sampled_from([-0.2, 0.0, 0.3]))
def test_weight_symmetry(seed, x, i, q):
    m = builtin("p_system")
    rng = np.random.default_rng(seed)
    v, w = random_pcf(m, rng, 4, 0.04), random_pcf(m, rng, 4, 0.04)
    assert stability_weight(m, v, w, i, q, x, UNIT) == pytest.approx(stability_weight(m, w, v, i, -q, x, UNIT),
                                                                     rel=1e-14)


# -- Phi ---------------------------------------------------------------------


def test_phi_hand_example(burgers):
    zero = PiecewiseConstantFn.constant(burgers)
    vt = step(burgers, [0, 1], [[-0.1]])
    phi = stability_phi(burgers, zero, vt, UNIT)
    assert phi == pytest.approx(0.111)
    assert 1.0 <= phi / zero.l1_distance(vt) <= 2.0
    assert stability_phi(burgers, vt, vt, UNIT) == 0.0
    d = stability_phi(burgers, zero, vt, UNIT, detail=True)
    assert d.value == phi and np.allclose(pointwise_q(burgers, zero, vt, [0.0, 1.0]), -0.1)


@given(st.integers(0, 10_000))
def test_phi_self_distance_zero(seed):
    m = builtin("p_system")
    u = random_pcf(m, np.random.default_rng(seed))
    assert stability_phi(m, u, u, UNIT) == 0.0


@given(st.integers(0, 10_000))
def test_phi_equivalence_property(seed):
    fitted = fitted_constants()
    for name in ("burgers", "p_system"):
        m = builtin(name)
        c = model_constants(name)
        rng = np.random.default_rng(seed)
        v, w = random_admissible_pcf(m, rng, c), random_admissible_pcf(m, rng, c)
        d = v.l1_distance(w)
        C = fitted[name]["C_equiv"]
        assert d / C <= stability_phi(m, v, w, c) <= 2 * C * d


# -- coarsening ----------------------------------------------------------------


def test_sample_coarsen_examples(burgers, psys, rng):
    zero = PiecewiseConstantFn.constant(psys)
    assert sample_coarsen(zero, [0.0, 1.0, 2.0], [0.5, 1.5]).is_constant
    u = random_pcf(psys, rng)
    bp = u.breakpoints
    same = sample_coarsen(u, bp, bp[:-1])
    assert np.array_equal(same.values, u.values) and np.array_equal(same.breakpoints, bp)
    with pytest.raises(BadParameter):
        sample_coarsen(u, [0.0, 1.0], [1.0])


def test_removing_an_interior_value_three_states(burgers):
    # u attains 0.1, -0.05, 0.08; the coarsening drops the middle value
    for mid in (-0.05, 0.2, 0.09):
        u = step(burgers, [0, 1, 2, 3], [[0.1], [mid], [0.08]])
        uc = sample_coarsen(u, [0, 2, 3], [0.5, 2.5])
        assert interaction_potential(burgers, uc) <= interaction_potential(burgers, u) + 1e-15


@given(st.integers(0, 100_000), st.sampled_from(["burgers", "p_system"]))
def test_coarsening_monotone(seed, name):
    m = builtin(name)
    c = model_constants(name)
    rng = np.random.default_rng(seed)
    u = random_admissible_pcf(m, rng, c, jumps=int(rng.integers(3, 9)), budget=0.06)
    uc = random_coarsening(u, rng)
    assert interaction_potential(m, uc) <= interaction_potential(m, u) + 1e-10
    assert glimm_total(m, uc, c) <= glimm_total(m, u, c) + 1e-10


@given(st.integers(0, 100_000), st.sampled_from(["burgers", "p_system"]))
def test_weight_and_phi_coarsening(seed, name):
    m = builtin(name)
    c = model_constants(name)
    fit = fitted_constants()[name]
    rng = np.random.default_rng(seed)
    u = random_admissible_pcf(m, rng, c, jumps=int(rng.integers(3, 9)), budget=0.06)
    uc = random_coarsening(u, rng)
    Qu, Qc = interaction_potential(m, u), interaction_potential(m, uc)
    for x in rng.uniform(-0.5, 4.5, 5):
        for i in range(m.n):
            for q in (-1.0, 1.0):
                lhs = big_A(m, uc, i, q, x) + c.kappa2 * Qc
                rhs = big_A(m, u, i, q, x) + c.kappa2 * Qu + fit["C_weights"] * np.linalg.norm(uc(x) - u(x))
                assert lhs <= rhs + 1e-12
    w = random_admissible_pcf(m, rng, c, jumps=int(rng.integers(3, 9)), budget=0.06)
    wc = random_coarsening(w, rng)
    bound = fit["C_reduce"] * (uc.l1_distance(u) + wc.l1_distance(w))
    assert stability_phi(m, uc, wc, c) <= stability_phi(m, u, w, c) + bound + 1e-12


@pytest.mark.parametrize("name", ["burgers", "p_system"])
def test_lipschitz_constant_independent_of_size(name):
    m = builtin(name)
    C = fitted_constants()[name]["C_state_equiv"]
    for N in (4, 16, 64):
        for k in range(10):
            rng = np.random.default_rng([N, k])
            u = random_pcf(m, rng, jumps=N, budget=0.05, span=(0, N))
            a = int(rng.integers(0, u.values.shape[0]))
            h = rng.normal(size=m.n)
            h *= 1e-4 / np.linalg.norm(h)
            vals = u.values.copy()
            vals[a] += h
            w = PiecewiseConstantFn(u.breakpoints, vals, u.background)
            V = linear_functional(m, u)
            assert abs(linear_functional(m, w) - V) <= 2 * C * 1e-4 * (1 + 1e-6)
            assert abs(interaction_potential(m, w) - interaction_potential(m, u)) <= 4 * C * V * 1e-4 * 1.01
