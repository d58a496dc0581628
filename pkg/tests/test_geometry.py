import math

import numpy as np
import pytest

from interlimit.fields import Grid
from interlimit.geometry import (GeometryError, InterfaceCurve, TubularChart, commutator, curvature,
                                 distance_identities, grid_gradient, normal_derivative, normal_velocity,
                                 surface_divergence, surface_gradient, surface_gradient_at,
                                 tangent_normal, tangential_projection)

PERTURBED = {2: 0.05, 3: 0.03, 5: 0.01}


def test_unit_circle_frame_at_zero():
    c = InterfaceCurve.circle(1.0, (0.0, 0.0))
    tau, n = tangent_normal(c, 0.0)
    np.testing.assert_allclose(tau, [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(n, [-1.0, 0.0], atol=1e-15)


def test_normal_is_rotated_tangent():
    c = InterfaceCurve.perturbed_circle(0.25, PERTURBED)
    s = np.linspace(0, 1, 97)
    tau, n = tangent_normal(c, s)
    np.testing.assert_allclose(np.sum(tau * n, axis=-1), 0.0, atol=1e-15)
    np.testing.assert_allclose(np.hypot(*tau.T), 1.0, atol=1e-15)
    np.testing.assert_array_equal(n[:, 0], -tau[:, 1])


def test_clockwise_input_is_reoriented():
    c = InterfaceCurve([0, 1], [0.5, 0.25], [0, 0], [0.5, 0], [0, -0.25])
    assert c.flipped
    assert c.area() == pytest.approx(math.pi * 0.25 ** 2, rel=1e-12)


def test_normal_points_inside():
    c = InterfaceCurve.circle(0.25)
    ch = TubularChart(c, 0.03)
    s = np.linspace(0, 1, 16, endpoint=False)
    _, n = tangent_normal(c, s)
    X = c.position(s)
    assert np.all(ch.project(X + 0.01 * n).d > 0)
    assert np.all(ch.project(X - 0.01 * n).d < 0)


@pytest.mark.parametrize("R", [0.25, 1.0])
def test_circle_curvature(R):
    c = InterfaceCurve.circle(R, (0.0, 0.0))
    np.testing.assert_allclose(curvature(c, np.linspace(0, 1, 9)), 1.0 / R, rtol=1e-13)


def test_ellipse_curvature():
    a, b = 0.3, 0.2
    c = InterfaceCurve.ellipse(a, b)
    assert curvature(c, 0.0) == pytest.approx(a / b ** 2, rel=1e-13)


def test_degenerate_curve_rejected():
    with pytest.raises(GeometryError):
        InterfaceCurve([0, 1], [0.5, 0.0], [0, 0], [0.5, 0.0], [0, 0.0])


def test_self_intersecting_curve_rejected():
    with pytest.raises(GeometryError):
        InterfaceCurve.perturbed_circle(0.25, {3: 1.5})


def test_signed_distance_examples():
    ch = TubularChart(InterfaceCurve.circle(0.25, (0.0, 0.0)), 0.04)
    assert ch.signed_distance([0.1, 0.0]) == pytest.approx(0.15, abs=1e-12)
    assert ch.signed_distance([0.4, 0.0]) == pytest.approx(-0.15, abs=1e-12)
    d = ch.project(ch.curve.samples).d
    assert np.max(np.abs(d)) < 1e-12


def test_far_points_are_flagged():
    ch = TubularChart(InterfaceCurve.circle(0.1), 0.02)
    pr = ch.project([[0.99, 0.99]])
    assert pr.outside_box[0]
    with pytest.raises(GeometryError):
        ch.chart_coords(np.array([0.99, 0.99]))


def test_chart_coords_examples():
    c = InterfaceCurve.perturbed_circle(0.25, PERTURBED)
    ch = TubularChart(c, 0.03)
    x = ch.to_cartesian(0.05, 0.3)
    r, s = ch.chart_coords(x)
    assert r == pytest.approx(0.05, abs=1e-12)
    assert s == pytest.approx(0.3, abs=1e-12)
    r0, s0 = ch.chart_coords(c.position(0.7))
    assert abs(r0) < 1e-12 and s0 == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(GeometryError):
        ch.chart_coords(ch.to_cartesian(0.061, 0.3))


def test_chart_round_trip_random(rng):
    ch = TubularChart(InterfaceCurve.perturbed_circle(0.25, PERTURBED), 0.03)
    r = rng.uniform(-0.059, 0.059, 1000)
    s = rng.uniform(0, 1, 1000)
    x = ch.to_cartesian(r, s)
    rr, ss = ch.chart_coords(x)
    assert np.max(np.hypot(*(ch.to_cartesian(rr, ss) - x).T)) < 1e-10


def test_delta_checks():
    with pytest.raises(GeometryError):
        TubularChart(InterfaceCurve.circle(0.05), 0.03)
    with pytest.raises(GeometryError):
        TubularChart(InterfaceCurve.circle(0.25), 0.0)


def test_jacobian_examples():
    ch = TubularChart(InterfaceCurve.circle(0.25), 0.06)
    assert ch.jacobian_J(0.0, 0.3) == pytest.approx(2 * math.pi * 0.25, rel=1e-13)
    assert ch.jacobian_J(0.1, 0.3) == pytest.approx(2 * math.pi * 0.25 * 0.6, rel=1e-13)
    with pytest.raises(GeometryError):
        ch.jacobian_J(0.12, 0.3)


def test_jacobian_matches_finite_difference_determinant():
    c = InterfaceCurve.perturbed_circle(0.25, PERTURBED)
    ch = TubularChart(c, 0.03)
    r, s, k = 0.02, 0.37, 1e-6
    dr = (ch.to_cartesian(r + k, s) - ch.to_cartesian(r - k, s)) / (2 * k)
    ds = (ch.to_cartesian(r, s + k) - ch.to_cartesian(r, s - k)) / (2 * k)
    det = abs(dr[0] * ds[1] - dr[1] * ds[0])
    assert ch.jacobian_J(r, s) == pytest.approx(det, rel=1e-7)
    assert ch.jacobian_J(0.0, s) == pytest.approx(c.speed(s), rel=1e-14)


def test_stretched_rho_examples():
    ch = TubularChart(InterfaceCurve.circle(0.25, (0.0, 0.0)), 0.03)
    x = np.array([0.23, 0.0])
    assert ch.stretched_rho(x, 0.01) == pytest.approx(2.0, abs=1e-9)
    assert ch.stretched_rho(x, 0.01, h=lambda s: 1.0) == pytest.approx(1.0, abs=1e-9)
    assert ch.stretched_rho(np.array([0.25, 0.0]), 0.01) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("curve", [InterfaceCurve.circle(0.2), InterfaceCurve.circle(0.25),
                                   InterfaceCurve.circle(0.3), InterfaceCurve.perturbed_circle(0.25, PERTURBED)])
def test_distance_identities(curve):
    out = distance_identities(TubularChart(curve, 0.03), 1 / 128)
    assert out["grad_norm"] < 1e-8
    assert out["laplacian"] <= out["tolerance"]
    assert out["orthogonality"] <= out["tolerance"]
    assert out["round_trip"] <= 1e-10


def test_laplacian_of_distance_second_order():
    ch = TubularChart(InterfaceCurve.perturbed_circle(0.25, PERTURBED), 0.03)
    e = [distance_identities(ch, h)["laplacian"] for h in (1 / 64, 1 / 128, 1 / 256)]
    assert np.log2(e[0] / e[1]) > 1.8 and np.log2(e[1] / e[2]) > 1.8


@pytest.fixture(scope="module")
def frame():
    grid = Grid(128)
    ch = TubularChart(InterfaceCurve.perturbed_circle(0.25, PERTURBED), 0.03)
    return ch, ch.grid_frame(grid)


def test_surface_gradient_of_distance_vanishes(frame):
    ch, fr = frame
    g = surface_gradient(fr.d, fr)
    inner = np.abs(fr.d) < 0.03
    assert np.nanmax(np.abs(g[inner])) < 5e-3
    assert np.all(np.isnan(g[~fr.in_chart]))


def test_surface_gradient_of_parameter_is_tangential(frame):
    ch, fr = frame
    s = np.unwrap(2 * np.pi * fr.s, axis=0) / (2 * np.pi)
    s = np.unwrap(2 * np.pi * s, axis=1) / (2 * np.pi)
    g = surface_gradient(s, fr)
    inner = (np.abs(fr.d) < 0.03)
    np.testing.assert_allclose(np.sum(g * fr.n, axis=-1)[inner], 0.0, atol=1e-12)
    x, y = fr.grid.mesh
    left = inner & (x > 0.5) & (np.abs(y - 0.5) < 0.1)  # away from the parameter seam
    err = np.abs(g - fr.grad_S)[left]
    assert np.max(err) < 1e-2 * np.max(np.abs(fr.grad_S[left]))


def test_surface_gradient_of_constant(frame):
    ch, fr = frame
    g = surface_gradient(np.full_like(fr.d, 3.0), fr)
    assert np.nanmax(np.abs(g)) == 0.0


def test_gradient_decomposition_exact(frame):
    ch, fr = frame
    x, y = fr.grid.mesh
    u = np.sin(3 * x) * np.cos(2 * y)
    g = grid_gradient(u, fr.grid.h)
    back = normal_derivative(u, fr)[..., None] * fr.n + tangential_projection(g, fr.n)
    np.testing.assert_allclose(back, g, atol=1e-13)


def test_pointwise_surface_gradient():
    grid = Grid(128)
    ch = TubularChart(InterfaceCurve.circle(0.25), 0.03)
    fr = ch.grid_frame(grid)
    g = surface_gradient_at(fr.d, grid, ch, np.array([0.75, 0.5]))
    assert np.max(np.abs(g)) < 1e-3
    with pytest.raises(GeometryError):
        surface_gradient_at(fr.d, grid, ch, np.array([0.001, 0.5]))


def test_commutator_forms_agree():
    errs = []
    for N in (64, 128):
        grid = Grid(N)
        ch = TubularChart(InterfaceCurve.circle(0.25), 0.03)
        fr = ch.grid_frame(grid)
        x, y = grid.mesh
        u = np.sin(2 * np.pi * x) * np.cos(np.pi * y)
        a, b = commutator(u, fr)
        inner = np.abs(fr.d) < 0.03
        errs.append(np.max(np.abs(a - b)[inner]))
    assert errs[1] < 0.75 * errs[0]


def test_surface_divergence_integration_by_parts():
    # int u div^G v = -int grad^G u . v + int kappa u v.n, for v tangential the last term drops
    res = []
    for N in (64, 128):
        grid = Grid(N)
        ch = TubularChart(InterfaceCurve.perturbed_circle(0.25, {2: 0.05, 3: 0.03}), 0.03)
        fr = ch.grid_frame(grid)
        x, y = grid.mesh
        bump = np.where(np.abs(fr.d) < 0.03, np.cos(np.pi * fr.d / 0.06) ** 4, 0.0)
        u = bump * (x + y ** 2)
        v = bump[..., None] * fr.tau * np.exp(x)[..., None]
        lhs = np.sum(grid.weights * u * surface_divergence(v[..., 0], v[..., 1], fr))
        gu = tangential_projection(grid_gradient(u, grid.h), fr.n)
        rhs = -np.sum(grid.weights * np.sum(gu * v, axis=-1))
        res.append(abs(lhs - rhs))
    assert res[1] < 0.5 * res[0]


def test_normal_velocity_of_shrinking_circle():
    R = lambda t: 0.25 - 0.5 * t
    V = normal_velocity(lambda t: InterfaceCurve.circle(R(t)), 0.1, np.array([0.5 + 0.2, 0.5]))
    assert V == pytest.approx(0.5, rel=1e-6)


def test_curve_csv_round_trip(tmp_path):
    c = InterfaceCurve.perturbed_circle(0.25, PERTURBED)
    path = tmp_path / "curve.csv"
    c.to_csv(path)
    assert path.read_text().splitlines()[0] == "k,ax,bx,ay,by"
    back = InterfaceCurve.from_csv(path)
    np.testing.assert_array_equal(back.position(np.linspace(0, 1, 11)), c.position(np.linspace(0, 1, 11)))


def test_perturbed_circle_area():
    a = PERTURBED
    c = InterfaceCurve.perturbed_circle(0.25, a)
    exact = 0.5 * 0.25 ** 2 * 2 * math.pi * (1 + 0.5 * sum(v ** 2 for v in a.values()))
    assert c.area() == pytest.approx(exact, rel=1e-12)
