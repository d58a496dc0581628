import math

import numpy as np
import pytest

from interlimit.fields import Grid
from interlimit.geometry import InterfaceCurve, TubularChart
from interlimit.sharp import (CollapseError, Trajectory, collapse_time, compose_ansatz, exact_radius,
                              inscribed_radius, radial_evolve, radial_fields, radial_rate, time_to_radius)

SIG = math.sqrt(2.0) / 3.0


def test_log_midpoint():
    R_out = 0.5
    R = R_out / math.e
    st = radial_fields(R, 0.3, R_out)
    assert st.mu_minus(math.sqrt(R * R_out)) == pytest.approx(0.5 * 0.3 / R, rel=1e-14)


def test_outer_potential_solves_radial_laplace():
    st = radial_fields(0.25, SIG, 0.5)
    r = np.linspace(0.26, 0.49, 200)
    h = 1e-4
    mu = st.mu_minus
    lap = (mu(r + h) - 2 * mu(r) + mu(r - h)) / h ** 2 + (mu(r + h) - mu(r - h)) / (2 * h * r)
    assert np.max(np.abs(lap)) < 1e-4
    assert st.mu_minus(0.5) == 0.0
    assert st.mu(0.25 - 1e-12) == st.mu_minus(0.25)


def test_zero_tension_state():
    st = radial_fields(0.25, 0.0, 0.5)
    assert st.mu_plus == 0.0 and st.p_jump == 0.0
    assert np.all(st.mu(np.linspace(0.01, 0.49, 11)) == 0.0)


def test_pressure_jump():
    st = radial_fields(0.25, SIG, 0.5)
    assert st.p_jump == pytest.approx(2 * SIG / 0.25, rel=1e-15)
    assert st.p_jump == pytest.approx(3.7712, abs=1e-4)
    assert st.pressure(0.1) - st.pressure(0.4) == st.p_jump
    assert st.p_minus == 0.0


def test_gibbs_thomson():
    c = InterfaceCurve.circle(0.25)
    from interlimit.geometry import curvature
    H = float(curvature(c, 0.0))
    st = radial_fields(0.25, SIG, 0.5)
    assert st.mu(0.25) == pytest.approx(SIG * H, abs=1e-12)
    assert st.mu_plus == pytest.approx(SIG * H, abs=1e-12)


def test_invalid_radius():
    with pytest.raises(ValueError):
        radial_fields(0.5, SIG, 0.5)
    with pytest.raises(ValueError):
        radial_evolve(0.6, SIG, 0.5, 0.01, 1e-4)


def test_rate_from_flux_jump_with_inward_normal():
    # n points into the disk, [g](p) = g(p + n h) - g(p - n h), V = -d/dt d_Gamma = -R'
    R, R_out = 0.25, 0.5
    st = radial_fields(R, SIG, R_out)
    h = 1e-5
    # one-sided second-order derivatives from the interface into each phase, n . grad = -d/dr
    inside = -(3 * st.mu(R - 1e-14) - 4 * st.mu(R - h) + st.mu(R - 2 * h)) / (2 * h)
    outside = -(-3 * st.mu(R) + 4 * st.mu(R + h) - st.mu(R + 2 * h)) / (2 * h)
    jump = inside - outside
    minus_V = 0.5 * jump
    assert minus_V == pytest.approx(radial_rate(R, SIG, R_out), abs=1e-8 * abs(minus_V) + 1e-8)
    assert st.flux_jump() == pytest.approx(jump, rel=1e-6)
    assert st.dRdt < 0


def test_zero_tension_keeps_radius():
    tr = radial_evolve(0.25, 0.0, 0.5, 0.05, 1e-3)
    assert np.all(tr.R == 0.25)


def test_shrinking_and_closed_form():
    tr = radial_evolve(0.25, SIG, 0.5, 0.02, 1e-5)
    assert np.all(np.diff(tr.R) < 0)
    for t in (0.002, 0.01, 0.015, 0.02):
        assert tr.radius(t) == pytest.approx(exact_radius(t, 0.25, SIG, 0.5), abs=1e-10)
    assert time_to_radius(tr.R[-1], 0.25, SIG, 0.5) == pytest.approx(0.02, abs=1e-10)


def test_reference_values():
    assert collapse_time(0.25, SIG, 0.5) == pytest.approx(0.022682, abs=1e-6)
    for t, R in ((0.002, 0.239), (0.005, 0.2218), (0.01, 0.1904), (0.015, 0.153), (0.02, 0.099)):
        assert exact_radius(t, 0.25, SIG, 0.5) == pytest.approx(R, abs=6e-4)
    assert exact_radius(0.03, 0.25, SIG, 0.5) == 0.0


def test_rk4_fourth_order():
    ref = exact_radius(0.015, 0.25, SIG, 0.5)
    err = [abs(radial_evolve(0.25, SIG, 0.5, 0.015, dt).R[-1] - ref) for dt in (1e-3, 5e-4, 2.5e-4)]
    orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
    assert np.all(orders > 3.7)


def test_stop_flag_and_collapse():
    tr = radial_evolve(0.25, SIG, 0.5, 0.05, 1e-5, r_min=0.08)
    assert tr.stopped and tr.R[-1] < 0.08 and tr.t_end < 0.0227
    with pytest.raises(CollapseError):
        radial_evolve(0.25, SIG, 0.5, 0.05, 1e-3)


def test_trajectory_interpolation_and_range():
    tr = radial_evolve(0.25, SIG, 0.5, 0.01, 1e-3)
    assert tr.radius(0.0045) == pytest.approx(exact_radius(0.0045, 0.25, SIG, 0.5), abs=1e-8)
    assert math.isnan(tr.radius(0.02))
    with pytest.raises(ValueError):
        tr.state(0.02)


def test_trajectory_csv(tmp_path):
    tr = radial_evolve(0.25, SIG, 0.5, 0.001, 5e-4)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,R,mu_plus,p_jump"
    t, R, mu, pj = map(float, lines[-1].split(","))
    assert mu == pytest.approx(SIG / R) and pj == pytest.approx(2 * SIG / R)


def test_inscribed_radius():
    assert inscribed_radius((0.5, 0.5)) == 0.5
    assert inscribed_radius((0.3, 0.6)) == pytest.approx(0.3)


@pytest.fixture(scope="module")
def ansatz(profile):
    grid = Grid(128)
    st = radial_fields(0.25, SIG, 0.5)
    c, mu = compose_ansatz(st, grid, profile, 0.04, 0.0, 0.045)
    return grid, st, c, mu


def test_ansatz_walls_and_far_field(ansatz):
    grid, st, c, mu = ansatz
    assert np.all(c[[0, -1], :] == -1.0) and np.all(c[:, [0, -1]] == -1.0)
    assert np.all(mu[[0, -1], :] == 0.0) and np.all(mu[:, [0, -1]] == 0.0)
    x, y = grid.mesh
    r = np.hypot(x - 0.5, y - 0.5)
    inner = r <= 0.25 - 0.09
    assert np.all(c[inner] == 1.0)
    np.testing.assert_allclose(mu[inner], st.mu_plus, rtol=1e-15)


def test_ansatz_on_interface(ansatz, profile):
    grid, st, c, mu = ansatz
    # vertex (96, 64) lies on the circle
    assert abs(c[96, 64]) < 1e-12
    assert mu[96, 64] == pytest.approx(st.mu_plus, rel=1e-9)


def test_ansatz_outer_potential_harmonic(ansatz):
    grid, st, c, mu = ansatz
    h = grid.h
    lap = (mu[2:, 1:-1] + mu[:-2, 1:-1] + mu[1:-1, 2:] + mu[1:-1, :-2] - 4 * mu[1:-1, 1:-1]) / h ** 2
    x, y = grid.mesh
    r = np.hypot(x - 0.5, y - 0.5)[1:-1, 1:-1]
    bnd = np.minimum.reduce([x, y, 1 - x, 1 - y])[1:-1, 1:-1]
    far = (np.abs(r - 0.25) > 0.1) & (bnd > 2 * h)
    assert np.max(np.abs(lap[far])) < 10 * h ** 2 * st.mu_plus / 0.25 ** 4


def test_ansatz_chart_mismatch(profile):
    grid = Grid(64)
    st = radial_fields(0.25, SIG, 0.5)
    chart = TubularChart(InterfaceCurve.circle(0.2), 0.045)
    with pytest.raises(ValueError):
        compose_ansatz(st, grid, profile, 0.04, 0.0, 0.045, chart=chart)


def test_ansatz_from_trajectory(profile):
    grid = Grid(64)
    tr = radial_evolve(0.25, SIG, 0.5, 0.01, 1e-4)
    c, mu = compose_ansatz(tr, grid, profile, 0.08, 0.005, 0.045)
    area = np.sum(grid.weights * (c > 0))
    assert math.sqrt(area / math.pi) == pytest.approx(tr.radius(0.005), abs=2 * grid.h)
