import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from spnsde import models
from spnsde.fluid import drift, fluid_speed, fluid_speeds, solve_ode
from spnsde.structural import minimal_psemiflows


def sir_rhs(rates):
    """Hand-written mean-field equations of the SIR reconstruction."""
    a_s, a_i, b_i, b_r, l_s, l_i, l_r = rates

    def f(_, x):
        o, s, i, r = x
        inf = b_i * min(s, i)
        return [-a_s * o - a_i * o + l_s * s + l_i * i + l_r * r,
                a_s * o - inf - l_s * s,
                a_i * o + inf - b_r * i - l_i * i,
                b_r * i - l_r * r]
    return f


def test_speeds(cycle, sir1):
    assert fluid_speed(cycle, [30, 70], 0) == 30.0
    assert fluid_speed(cycle, [30.5, 70], 1) == 140.0
    assert fluid_speed(sir1, [1.0, 50, 50, 0], sir1.transition_index("BecomeI")) == 50.0
    # no floor on fractional coordinates
    assert fluid_speed(sir1, [1.0, 2.7, 50, 0], sir1.transition_index("BecomeI")) == pytest.approx(2.7)


def test_drift_hand_value(cycle):
    np.testing.assert_allclose(drift(cycle, [30, 70]), [110, -110])
    np.testing.assert_allclose(drift(cycle, [30, 70], transitions=[0]), [-30, 30])


def test_cycle_analytic():
    traj = solve_ode(models.cycle(), 1.0, 0.01)
    want = 100 * (2 / 3 + math.exp(-3) / 3)
    assert traj.at("A")[-1] == pytest.approx(want, abs=1e-6)
    assert traj.at("A")[-1] == pytest.approx(68.3262, abs=1e-4)
    assert traj.times[-1] == 1.0 and traj.times.size == 101


def test_short_last_step():
    traj = solve_ode(models.cycle(), 0.25, 0.1)
    np.testing.assert_allclose(traj.times, [0, 0.1, 0.2, 0.25])
    # RK4 on a linear ODE multiplies the deviation from equilibrium by the
    # degree-4 Taylor polynomial of exp(z), z = -(l1 + l2) h, per step
    def amp(z):
        return 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24

    want = 200 / 3 + (100 / 3) * amp(-0.3) ** 2 * amp(-0.15)
    assert traj.at("A")[-1] == pytest.approx(want, abs=1e-10)


def test_sir_exp2_against_lsoda(sir2):
    traj = solve_ode(sir2, 100.0, 0.01)
    ref = solve_ivp(sir_rhs(sir2.rates), (0, 100), [200.0, 0, 0, 0], method="LSODA",
                    rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(traj.states[-1], ref.y[:, -1], rtol=1e-5, atol=1e-6)


def test_sir_exp2_table_values(sir2):
    x = solve_ode(sir2, 100.0, 0.01).states[-1]
    # rows of the published table in reconstruction place order S, R, Outside
    for place, want in (("S", 4.367), ("R", 183.825), ("Outside", 4.454)):
        assert x[sir2.place_index(place)] == pytest.approx(want, rel=0.01)


@pytest.mark.parametrize("name", ["sir_exp1", "sir_exp2", "client_server", "cycle"])
def test_invariants_along_trajectory(name):
    m = models.CATALOG[name]()
    basis = minimal_psemiflows(m)
    traj = solve_ode(m, 5.0, 0.01)
    nu = basis.matrix(m.n_places)
    np.testing.assert_allclose(traj.states @ nu.T, np.tile(basis.constants, (traj.times.size, 1)),
                               rtol=1e-10)
    assert np.all(traj.states >= 0)


def test_ring_fixed_point():
    net = models.closed_queue_network(3, [1.0, 1.0, 1.0], [[0, 1, 0], [0, 0, 1], [1, 0, 0]], 300)
    x = solve_ode(net, 30.0, 0.01).states[-1]
    np.testing.assert_allclose(x, [100, 100, 100], atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(name=st.sampled_from(sorted(models.CATALOG)), data=st.data())
def test_drift_orthogonal_to_semiflows(name, data):
    m = models.CATALOG[name]()
    x = np.array(data.draw(st.lists(st.floats(0, 1e4), min_size=m.n_places, max_size=m.n_places)))
    nu = minimal_psemiflows(m).matrix(m.n_places)
    d = drift(m, x)
    assert np.all(np.abs(nu @ d) <= 1e-9 * (1 + np.abs(fluid_speeds(m, x)).sum() * nu.max()))
