import math

import numpy as np
import pytest

from interlimit.diffuse import (DIAG_COLUMNS, SimParams, SolverFailure, State, diagnostics, energy,
                                init_state, initial_c, mass, run, state_from_c, step)
from interlimit.geometry import InterfaceCurve, TubularChart
from interlimit.potential import cutoff_xi, sigma


@pytest.fixture(scope="module")
def circle_run():
    p = SimParams(eps=0.04, N=128, dt=1e-4, T=0.003)
    states = []
    run(p, callback=lambda st, prev: states.append(st))
    return p, states


def test_params_invariants():
    with pytest.raises(ValueError):
        SimParams(eps=0.01, N=64).validate()
    with pytest.raises(ValueError):
        SimParams(eps=0.04, N=128, curve=InterfaceCurve.circle(0.4)).validate()
    with pytest.raises(ValueError):
        SimParams(eps=0.04, N=128, scheme="euler").validate()
    assert SimParams(eps=0.04, N=100).validate() != []
    assert SimParams(eps=0.04, N=256).validate() == []


def test_default_time_step():
    p = SimParams(eps=0.04, N=128)
    assert p.dt == pytest.approx(0.1 * 0.04 / 128)


def test_initial_profile_examples(profile):
    p = SimParams(eps=0.04, N=128)
    chart = TubularChart(p.curve, p.delta)
    c = initial_c(p, profile, chart)
    d = chart.project(p.grid.points).d.reshape(c.shape)
    core = np.abs(d) <= p.delta
    np.testing.assert_allclose(c[core], profile.theta0(d[core] / p.eps), atol=1e-15)
    assert np.all(c[d >= 2 * p.delta] == 1.0)
    assert np.all(c[[0, -1], :] == -1.0) and np.all(c[:, [0, -1]] == -1.0)
    xi = cutoff_xi(d, p.delta)
    band = (np.abs(d) > p.delta) & (np.abs(d) < 2 * p.delta)
    expect = xi * profile.theta0(d / p.eps) + (1 - xi) * np.sign(d)
    np.testing.assert_allclose(c[band], expect[band], atol=1e-15)


def test_initial_zero_on_curve(profile):
    # a vertex lying exactly on the circle x = 0.75, y = 0.5
    p = SimParams(eps=0.04, N=128)
    c = initial_c(p, profile)
    assert abs(c[96, 64]) < 1e-12


def test_initial_energy_bounded_in_eps(profile):
    E = [energy(initial_c(SimParams(eps=e, N=N), profile), SimParams(eps=e, N=N))
         for e, N in ((0.04, 128), (0.02, 256))]
    assert max(E) / min(E) <= 1.2


@pytest.mark.xfail(strict=True, reason="at eps = 0.08 the layer does not fit in the cut-off band 2 delta = 0.09 "
                                       "(theta0(2 delta / eps) = 0.71), which inflates the energy by 55%")
def test_initial_energy_bounded_including_coarsest(profile):
    E = [energy(initial_c(SimParams(eps=e, N=N), profile), SimParams(eps=e, N=N))
         for e, N in ((0.08, 128), (0.04, 128), (0.02, 256))]
    assert max(E) / min(E) <= 1.2


def test_energy_of_wall_state_is_zero():
    p = SimParams(eps=0.04, N=64 * 2)
    assert energy(np.full((129, 129), -1.0), p) == 0.0


def test_planar_layer_energy_is_twice_sigma(profile):
    p = SimParams(eps=0.02, N=512)
    x, y = p.grid.mesh
    c = profile.theta0((y - 0.5) / p.eps)
    assert energy(c, p) == pytest.approx(2 * sigma(profile), rel=0.01)


def test_circle_energy_is_twice_sigma_length(profile):
    p = SimParams(eps=0.02, N=256)
    E = energy(initial_c(p, profile), p)
    assert E == pytest.approx(2 * sigma(profile) * 2 * math.pi * 0.25, rel=0.01)


def test_flat_state_is_fixed_point():
    p = SimParams(eps=0.04, N=128, dt=1e-4)
    st = state_from_c(np.full((129, 129), -1.0), p)
    new = step(st, p)
    np.testing.assert_array_equal(new.c, st.c)
    assert np.max(np.abs(new.mu)) == 0.0
    assert np.max(np.abs(new.velocity)) == 0.0
    row = diagnostics(new, st, p)
    assert row.grad_mu_sq == 0.0 and row.grad_v_sq == 0.0 and row.boundary_v_sq == 0.0
    assert row.energy == 0.0


def test_boundary_rows_exact(circle_run):
    p, states = circle_run
    for st in states:
        assert np.all(st.c[[0, -1], :] == -1.0) and np.all(st.c[:, [0, -1]] == -1.0)
        assert np.all(st.mu[[0, -1], :] == 0.0) and np.all(st.mu[:, [0, -1]] == 0.0)


def test_energy_decreases(circle_run):
    p, states = circle_run
    E = [energy(st, p) for st in states]
    assert np.all(np.diff(E) <= 1e-10)


def test_energy_balance_closes(circle_run):
    p, states = circle_run
    for st in states[1:]:
        i = st.info
        assert i["identity_residual"] < 1e-8
        assert i["numerical_dissipation"] >= -1e-12
        assert i["stokes_residual"] <= 1e-10
        assert not i["cfl_violation"]


def test_mass_is_not_conserved(circle_run):
    p, states = circle_run
    drift = mass(states[-1].c, p) - mass(states[0].c, p)
    assert abs(drift) > 1e-6


def test_reflection_symmetry_preserved():
    p = SimParams(eps=0.04, N=128, dt=1e-4, T=0.01)
    st = run(p)
    assert st.n == 100
    assert np.max(np.abs(st.c - st.c.T)) < 1e-10
    assert np.max(np.abs(st.c - st.c[::-1])) < 1e-10


def test_diagnostics_row(circle_run):
    p, states = circle_run
    row = diagnostics(states[-1], states[-2], p)
    assert len(row.values()) == len(DIAG_COLUMNS)
    assert 0.2 < row.radius < 0.25
    assert row.interface_length == pytest.approx(2 * math.pi * row.radius, rel=0.01)
    assert row.grad_v_sq > 0 and row.grad_mu_sq > 0


def test_bound_violation_aborts():
    p = SimParams(eps=0.04, N=128, dt=1e-4, c_bound=0.5)
    st = init_state(p)
    with pytest.raises(SolverFailure):
        step(st, p)


def test_zero_tension_freezes_interface():
    p = SimParams(eps=0.04, N=128, dt=1e-3, T=0.01, tension=0.0)
    st0 = init_state(p)
    st = run(p, state=st0)
    assert np.max(np.abs(st.c - st0.c)) < 1e-12
    assert np.max(np.abs(st.velocity)) == 0.0


def _final(dt, scheme):
    return run(SimParams(eps=0.08, N=64, dt=dt, T=0.004, scheme=scheme)).c


def test_time_orders_of_schemes():
    rates = {}
    for scheme in ("cs1", "bdf2"):
        cs = [_final(dt, scheme) for dt in (4e-4, 2e-4, 1e-4)]
        rates[scheme] = np.max(np.abs(cs[0] - cs[1])) / np.max(np.abs(cs[1] - cs[2]))
    assert rates["cs1"] < 2 ** 1.2
    assert rates["bdf2"] > 2 ** 1.7


def test_bdf2_first_step_is_first_order_update():
    a = SimParams(eps=0.04, N=128, dt=1e-4, scheme="cs1")
    b = SimParams(eps=0.04, N=128, dt=1e-4, scheme="bdf2")
    st = init_state(a)
    np.testing.assert_array_equal(step(st, a).c, step(st, b).c)
