import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import fsolve

from hypstab.flux_models import builtin, eigen_at
from hypstab.riemann import (RAREFACTION, SHOCK, lax_point, psi_compose, rarefaction_point, riemann_fan,
                             shock_compose, shock_point, solve_shock_strengths, solve_strengths)

U0 = np.array([1.0, 0.0])


def rk4_oracle(model, i, sigma, u, steps=10_000):
    """Integral curve of r_i via generic eigenvectors, fixed-step RK4."""
    gen = model.with_generic()
    r = lambda w: eigen_at(gen, w).right_vecs[i]
    h = sigma / steps
    u = np.array(u, float)
    for _ in range(steps):
        k1 = r(u)
        k2 = r(u + 0.5 * h * k1)
        k3 = r(u + 0.5 * h * k2)
        k4 = r(u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def rh_oracle(model, i, sigma, u, steps=1000):
    """Rankine-Hugoniot state with lambda_i increment k sigma, by continuation in sigma."""
    lam = lambda w: np.linalg.eigvals(model.jacobian(w)).real.min() if i == 0 else \
        np.linalg.eigvals(model.jacobian(w)).real.max()
    l0 = lam(u)
    w, s = np.array(u, float), l0
    for t in np.linspace(0, sigma, steps + 1)[1:]:
        def F(z):
            wp, sp = z[:2], z[2]
            rh = model.flux(wp) - model.flux(u) - sp * (wp - u)
            return [rh[0], rh[1], lam(wp) - l0 - model.k[i] * t]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # stalls only once at machine precision
            z = fsolve(F, np.r_[w, s], xtol=1e-13)
        assert np.max(np.abs(F(z))) < 1e-13
        w, s = z[:2], z[2]
    return w, s


def test_burgers_rarefaction(burgers):
    assert rarefaction_point(burgers, 0, 0.2, [0.0])[0] == pytest.approx(0.2)


@pytest.mark.parametrize("name", ["burgers", "p_system"])
def test_zero_strength_identity(name):
    m = builtin(name)
    u = m.origin
    assert np.array_equal(rarefaction_point(m, 0, 0.0, u), u)
    st_, s = shock_point(m, 0, 0.0, u)
    assert np.array_equal(st_, u)
    assert s == pytest.approx(eigen_at(m, u).lambdas[0])


def test_p_system_rarefaction_matches_rk_oracle(psys):
    for i in range(2):
        assert np.allclose(rarefaction_point(psys, i, 0.05, U0), rk4_oracle(psys, i, 0.05, U0), atol=1e-10)


def test_p_system_shock_matches_continuation_oracle(psys):
    for i in range(2):
        got, s = shock_point(psys, i, -0.05, U0)
        want, s_want = rh_oracle(psys, i, -0.05, U0)
        assert np.allclose(got, want, atol=1e-9)
        assert s == pytest.approx(s_want, abs=1e-9)


def test_burgers_shock(burgers):
    u, s = shock_point(burgers, 0, -0.2, [0.1])
    assert u[0] == pytest.approx(-0.1)
    assert s == pytest.approx(0.0, abs=1e-15)


def test_lax_branches(burgers, psys):
    assert np.array_equal(lax_point(psys, 1, 0.03, U0), rarefaction_point(psys, 1, 0.03, U0))
    assert np.array_equal(lax_point(psys, 1, -0.03, U0), shock_point(psys, 1, -0.03, U0)[0])
    for s in (-0.1, 0.1):
        assert lax_point(burgers, 0, s, [0.0])[0] == pytest.approx(s)


def test_compositions(burgers, psys):
    assert np.array_equal(psi_compose(psys, [0.0, 0.0], U0), U0)
    assert np.array_equal(shock_compose(psys, [0.0, 0.0], U0), U0)
    assert psi_compose(burgers, [0.07], [0.0])[0] == pytest.approx(lax_point(burgers, 0, 0.07, [0.0])[0])
    assert shock_compose(burgers, [-0.07], [0.1])[0] == pytest.approx(shock_point(burgers, 0, -0.07, [0.1])[0][0])
    seq = lax_point(psys, 1, 0.04, lax_point(psys, 0, -0.03, U0))
    assert np.allclose(psi_compose(psys, [-0.03, 0.04], U0), seq, atol=1e-15)
    seq = shock_point(psys, 1, 0.01, shock_point(psys, 0, 0.01, U0)[0])[0]
    assert np.allclose(shock_compose(psys, [0.01, 0.01], U0), seq, atol=1e-9)


def test_inverse_maps(burgers, psys):
    assert np.array_equal(solve_strengths(psys, U0, U0), [0.0, 0.0])
    assert np.array_equal(solve_shock_strengths(psys, U0, U0), [0.0, 0.0])
    assert solve_strengths(burgers, [0.1], [-0.05])[0] == pytest.approx(-0.15)
    assert solve_shock_strengths(burgers, [0.1], [0.25])[0] == pytest.approx(0.15)
    sig = np.array([0.02, -0.01])
    assert np.allclose(solve_strengths(psys, U0, psi_compose(psys, sig, U0)), sig, atol=1e-9)


def test_inverse_generic_route_agrees(psys):
    gen = psys.with_generic()
    up = U0 + np.array([0.03, -0.02])
    assert np.allclose(solve_strengths(psys, U0, up), solve_strengths(gen, U0, up), atol=1e-8)
    assert np.allclose(solve_shock_strengths(psys, U0, up), solve_shock_strengths(gen, U0, up), atol=1e-8)


@given(st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.floats(-0.15, 0.15), st.floats(-0.15, 0.15))
def test_round_trips(s1, s2, dv, du):
    m = builtin("p_system")
    um = U0 + np.array([dv, du])
    sig = np.array([s1, s2])
    assert np.max(np.abs(solve_strengths(m, um, psi_compose(m, sig, um)) - sig)) <= 1e-9
    assert np.max(np.abs(solve_shock_strengths(m, um, shock_compose(m, sig, um)) - sig)) <= 1e-9


def test_tangency_is_third_order(psys):
    u = U0 + np.array([0.05, 0.02])
    for i in range(2):
        sig = np.array([0.02, 0.01, 0.005])
        gap = [np.linalg.norm(rarefaction_point(psys, i, -s, u) - shock_point(psys, i, -s, u)[0]) for s in sig]
        slope = np.polyfit(np.log(sig), np.log(gap), 1)[0]
        assert slope == pytest.approx(3.0, abs=0.2)


@given(st.integers(0, 1), st.floats(-0.1, -1e-4), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_lax_admissibility(i, sigma, dv, du):
    m = builtin("p_system")
    u = U0 + np.array([dv, du])
    up, s = shock_point(m, i, sigma, u)
    assert eigen_at(m, up).lambdas[i] < s < eigen_at(m, u).lambdas[i]


def test_fans(burgers, psys):
    assert riemann_fan(psys, U0, U0, 0.01).waves == []
    f = riemann_fan(burgers, [0.2], [-0.2], 0.05)
    assert len(f.waves) == 1 and f.waves[0].kind == SHOCK and f.waves[0].speed == pytest.approx(0.0, abs=1e-15)
    f = riemann_fan(burgers, [-0.2], [0.2], 0.05)
    assert [w.kind for w in f.waves] == [RAREFACTION] * 8
    assert [w.speed for w in f.waves] == pytest.approx(np.arange(-0.15, 0.2001, 0.05))


@given(st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.sampled_from([0.05, 0.01]))
def test_fan_chains_to_right_state(dv, du, eps):
    m = builtin("p_system")
    up = U0 + np.array([dv, du])
    f = riemann_fan(m, U0, up, eps)
    state = U0
    for w in f.waves:
        assert np.allclose(w.left, state, atol=1e-12)
        state = w.right
    assert np.allclose(state, up, atol=1e-9)
    speeds = [w.speed for w in f.waves]
    assert speeds == sorted(speeds)
