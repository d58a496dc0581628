import math

import numpy as np
import pytest

from interlimit.diffuse import grad_sq
from interlimit.fields import Grid
from interlimit.geometry import InterfaceCurve, TubularChart
from interlimit.norms import (ErrorAccumulator, ErrorNorms, append_errors_csv, as_dict, boundary_weight,
                              cell_integral, gamma_norms, h_minus1_norm, layer_mask, layer_norms,
                              poisson_dirichlet, spectral_energy)
from interlimit.potential import Potential
from interlimit.sharp import compose_ansatz, radial_fields


def _sine(N, L=1.0):
    g = Grid(N, L)
    x, y = g.mesh
    return g, np.sin(np.pi * x / L) * np.sin(np.pi * y / L)


@pytest.mark.parametrize("L", [1.0, 2.0])
def test_h_minus1_of_first_eigenfunction(L):
    # phi = R L^2 / (2 pi^2), so |grad phi| = |R| L / (sqrt 2 pi)
    errs = []
    for N in (32, 64):
        g, R = _sine(N, L)
        l2 = L / 2
        errs.append(abs(h_minus1_norm(R, L) - l2 * L / (math.sqrt(2) * math.pi)))
    assert errs[0] < 1e-3 * L ** 2
    assert errs[1] < 0.3 * errs[0]


def test_poisson_potential_l2_value():
    g, R = _sine(64)
    phi = poisson_dirichlet(R)
    l2_phi = math.sqrt(np.sum(g.weights * phi ** 2))
    assert l2_phi == pytest.approx(0.5 / (2 * math.pi ** 2), rel=1e-3)


def test_poisson_residual():
    g, _ = _sine(32)
    rng = np.random.default_rng(0)
    R = np.zeros((33, 33))
    R[1:-1, 1:-1] = rng.standard_normal((31, 31))
    phi = poisson_dirichlet(R)
    h = g.h
    lap = (phi[2:, 1:-1] + phi[:-2, 1:-1] + phi[1:-1, 2:] + phi[1:-1, :-2] - 4 * phi[1:-1, 1:-1]) / h ** 2
    np.testing.assert_allclose(-lap, R[1:-1, 1:-1], atol=1e-12 * np.abs(R).max() * 33 ** 2)


def test_h_minus1_trivial_and_homogeneous():
    g, R = _sine(32)
    assert h_minus1_norm(np.zeros_like(R)) == 0.0
    assert h_minus1_norm(-3.0 * R) == pytest.approx(3.0 * h_minus1_norm(R), rel=1e-14)


def test_interpolation_inequality(rng):
    N = 64
    g = Grid(N)
    x, y = g.mesh
    for _ in range(100):
        k = rng.integers(1, 8, size=(4, 2))
        a = rng.standard_normal(4)
        R = sum(ai * np.sin(np.pi * kx * x) * np.sin(np.pi * ky * y) for ai, (kx, ky) in zip(a, k))
        R = R + 0.1 * np.pad(rng.standard_normal((N - 1, N - 1)), 1)
        l2sq = cell_integral(R * R, g.h)
        assert l2sq <= h_minus1_norm(R) * math.sqrt(grad_sq(R)) * (1 + 10 * g.h)


@pytest.fixture(scope="module")
def frame():
    grid = Grid(128)
    chart = TubularChart(InterfaceCurve.circle(0.25), 0.045)
    return chart.grid_frame(grid)


def test_normal_only_field_has_small_tangential_norm(frame):
    delta = 0.045
    errs = []
    for N in (64, 128):
        grid = Grid(N)
        fr = TubularChart(InterfaceCurve.circle(0.25), delta).grid_frame(grid)
        R = np.tanh(fr.d / 0.04)
        q = layer_norms(R, fr, 0.04, delta)
        errs.append(q["tangential"])
        assert q["normal"] > 1.0
    assert errs[1] < 0.3 * errs[0]


def test_layer_entries_vanish_off_layer(frame):
    delta = 0.045
    x, y = frame.grid.mesh
    R = np.where(np.abs(frame.d) > 2.5 * delta, np.sin(5 * x) ** 2 * np.sin(np.pi * y), 0.0)
    q = layer_norms(R, frame, 0.04, delta)
    assert q["layer_l2"] == 0.0 and q["tangential"] == 0.0 and q["normal"] == 0.0
    assert q["bulk_l2"] > 0


def test_mask_additivity(frame, rng):
    R = rng.standard_normal(frame.d.shape)
    q = layer_norms(R, frame, 0.04, 0.045)
    assert q["layer_l2"] + q["bulk_l2"] == pytest.approx(q["l2"], rel=1e-13)
    mask = layer_mask(frame, 0.045)
    assert mask.shape == (128, 128) and 0 < mask.sum() < mask.size


def test_spectral_energy_examples(frame, profile):
    pot = Potential()
    h = frame.grid.h
    cA, _ = compose_ansatz(radial_fields(0.25, math.sqrt(2) / 3, 0.5), frame.grid, profile, 0.04, 0.0, 0.045)
    assert spectral_energy(np.zeros_like(cA), cA, 0.04, pot, h) == 0.0
    x, y = frame.grid.mesh
    R = np.where(cA == -1.0, np.sin(np.pi * x) * np.sin(np.pi * y), 0.0) * (np.hypot(x - 0.5, y - 0.5) > 0.4)
    val = spectral_energy(R, cA, 0.04, pot, h)
    assert val >= 2.0 / 0.04 * cell_integral(R * R, h)


def test_spectral_energy_near_null_mode_small(frame, profile):
    eps = 0.04
    pot = Potential()
    h = frame.grid.h
    cA, _ = compose_ansatz(radial_fields(0.25, math.sqrt(2) / 3, 0.5), frame.grid, profile, eps, 0.0, 0.045)
    R = np.where(np.abs(frame.d) < 0.09, profile.dtheta0(frame.d / eps), 0.0)
    bulk = np.where(np.abs(frame.d) > 0.1, np.sin(np.pi * frame.grid.mesh[0]) ** 2, 0.0)
    n_null = spectral_energy(R, cA, eps, pot, h) / cell_integral(R * R, h)
    n_bulk = spectral_energy(bulk, cA, eps, pot, h) / cell_integral(bulk * bulk, h)
    assert abs(n_null) < 0.1 * n_bulk


def test_boundary_weight():
    grid = Grid(64)
    gam = boundary_weight(grid, 0.045)
    assert np.all(gam[[0, -1], :] == 1.0)
    assert gam[32, 32] == 0.0
    q = gamma_norms(np.ones((65, 65)), grid, 0.045)
    assert q["gamma_l2"] > 0 and q["gamma_grad"] == 0.0


def test_accumulator_constant_in_time(frame, profile):
    acc = ErrorAccumulator(0.04, 0.045)
    cA = np.zeros_like(frame.d)
    R = np.outer(np.sin(np.pi * frame.grid.nodes), np.sin(np.pi * frame.grid.nodes))
    for t in (0.0, 0.5, 1.0):
        q = acc.add(t, R, cA, frame)
    res = acc.result()
    assert res.t_final == 1.0
    assert res.l2 == pytest.approx(math.sqrt(q["l2"]), rel=1e-13)
    assert res.l2_linf == pytest.approx(math.sqrt(q["l2"]), rel=1e-13)
    assert res.hm1_linf == pytest.approx(q["hm1"])
    assert res.normal_eps32 == pytest.approx(0.04 ** 1.5 * math.sqrt(q["normal"]))
    assert all(v >= 0 for k, v in as_dict(res).items() if k != "spectral_energy")


def test_errors_csv(tmp_path):
    path = tmp_path / "errors.csv"
    append_errors_csv(path, ErrorNorms(0.04, 0.05, l2=0.1))
    append_errors_csv(path, ErrorNorms(0.02, 0.05, l2=0.05))
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ErrorNorms.columns()
    assert len(lines) == 3
