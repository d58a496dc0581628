"""Error functionals for R = c - c_A on the vertex grid.

Spatial integrals use midpoint quadrature on cells (the cell value is the mean of its
four corners); the layer Gamma(delta) is selected cellwise by |d| < delta at the cell
centre, so layer and bulk integrals partition the domain exactly. Time norms are
accumulated online: trapezoid rule for L^2(0, T), running maximum for L^inf(0, T).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.fft as sfft

from .fields import Grid
from .geometry import GridFrame, grid_gradient, surface_gradient
from .potential import Potential, cutoff_xi


def _dst(a):
    return sfft.dstn(a, type=1, norm="ortho")


def _lam(N: int, L: float) -> np.ndarray:
    h = L / N
    k = np.arange(1, N)
    lam1 = (4.0 / h ** 2) * np.sin(k * np.pi / (2 * N)) ** 2
    return lam1[:, None] + lam1[None, :]


def poisson_dirichlet(R: np.ndarray, L: float = 1.0) -> np.ndarray:
    """Solve -Lap_h phi = R at interior vertices with phi = 0 on the walls (exact DST)."""
    R = np.asarray(R, dtype=float)
    N = R.shape[0] - 1
    phi = np.zeros_like(R)
    phi[1:-1, 1:-1] = _dst(_dst(R[1:-1, 1:-1]) / _lam(N, L))
    return phi


def h_minus1_norm(R: np.ndarray, L: float = 1.0) -> float:
    """|grad phi|_{L^2} with -Lap_h phi = R, phi = 0 on the walls (five-point form)."""
    R = np.asarray(R, dtype=float)
    N = R.shape[0] - 1
    Ri = _dst(R[1:-1, 1:-1])
    h = L / N
    return float(math.sqrt(max(h * h * np.sum(Ri * Ri / _lam(N, L)), 0.0)))


def cell_average(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def cell_integral(a: np.ndarray, h: float, mask: np.ndarray | None = None) -> float:
    """Midpoint quadrature of a vertex field, optionally restricted to masked cells."""
    v = cell_average(a)
    if mask is not None:
        v = np.where(mask, v, 0.0)
    return float(h * h * np.sum(v))


def layer_mask(frame: GridFrame, delta: float) -> np.ndarray:
    """Cells whose centre lies in Gamma(delta)."""
    d = cell_average(frame.d)
    inside = (frame.in_chart[:-1, :-1] | frame.in_chart[1:, 1:])
    return (np.abs(d) < delta) & inside


def boundary_weight(grid: Grid, delta: float) -> np.ndarray:
    """gamma = xi(4 d_B) at the vertices, d_B the distance to the walls."""
    return cutoff_xi(4.0 * grid.boundary_distance(), delta)


def layer_norms(R: np.ndarray, frame: GridFrame, eps: float, delta: float) -> dict:
    """Squared spatial integrals split by the Gamma(delta) mask.

    Keys: l2 (whole domain), layer_l2, tangential (|grad^Gamma R|^2 on the layer),
    normal (|d_n R|^2 on the layer), bulk_l2, bulk_grad (|grad R|^2 off the layer).
    """
    h = frame.grid.h
    mask = layer_mask(frame, delta)
    g = grid_gradient(R, h)
    gsq = np.sum(g * g, axis=-1)
    dn = np.einsum("...k,...k->...", g, frame.n)
    sg = surface_gradient(R, frame)
    sgsq = np.nan_to_num(np.sum(sg * sg, axis=-1), nan=0.0)
    R2 = R * R
    return {
        "l2": cell_integral(R2, h),
        "layer_l2": cell_integral(R2, h, mask),
        "tangential": cell_integral(sgsq, h, mask),
        "normal": cell_integral(dn * dn, h, mask),
        "bulk_l2": cell_integral(R2, h, ~mask),
        "bulk_grad": cell_integral(gsq, h, ~mask),
    }


def spectral_energy(R: np.ndarray, c_A: np.ndarray, eps: float, potential: Potential, h: float) -> float:
    """int eps |grad R|^2 + f''(c_A) R^2 / eps, signed total."""
    g = grid_gradient(R, h)
    dens = eps * np.sum(g * g, axis=-1) + potential.d2f(c_A) * R * R / eps
    return cell_integral(dens, h)


def gamma_norms(R: np.ndarray, grid: Grid, delta: float) -> dict:
    """Squared boundary-weighted integrals: gamma R, gamma Lap R, gamma grad R, gamma R grad R."""
    h = grid.h
    gam = boundary_weight(grid, delta)
    g = grid_gradient(R, h)
    gsq = np.sum(g * g, axis=-1)
    lap = np.zeros_like(R)
    lap[1:-1, 1:-1] = (R[2:, 1:-1] + R[:-2, 1:-1] + R[1:-1, 2:] + R[1:-1, :-2] - 4 * R[1:-1, 1:-1]) / h ** 2
    g2 = gam * gam
    return {
        "gamma_l2": cell_integral(g2 * R * R, h),
        "gamma_lap": cell_integral(g2 * lap * lap, h),
        "gamma_grad": cell_integral(g2 * gsq, h),
        "gamma_r_grad": cell_integral(g2 * R * R * gsq, h),
    }


@dataclass
class ErrorNorms:
    eps: float
    t_final: float
    l2: float = 0.0
    tangential: float = 0.0
    bulk_l2: float = 0.0
    bulk_grad_eps: float = 0.0
    normal_eps32: float = 0.0
    hm1_linf: float = 0.0
    spectral_energy: float = 0.0
    gamma_l2_linf: float = 0.0
    gamma_lap_eps12: float = 0.0
    gamma_grad: float = 0.0
    gamma_r_grad: float = 0.0
    l2_linf: float = 0.0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, k) for k in self.columns()]


class ErrorAccumulator:
    """Online time integration of the snapshot quantities."""

    _TIME_L2 = ("l2", "tangential", "bulk_l2", "bulk_grad", "normal", "spectral",
                "gamma_lap", "gamma_grad", "gamma_r_grad")

    def __init__(self, eps: float, delta: float, potential: Potential | None = None):
        self.eps = eps
        self.delta = delta
        self.potential = potential or Potential()
        self.integrals = dict.fromkeys(self._TIME_L2, 0.0)
        self.maxima = {"hm1": 0.0, "gamma_l2": 0.0, "l2": 0.0}
        self._last = None
        self.count = 0

    def snapshot(self, R: np.ndarray, c_A: np.ndarray, frame: GridFrame) -> dict:
        grid = frame.grid
        q = layer_norms(R, frame, self.eps, self.delta)
        q["spectral"] = spectral_energy(R, c_A, self.eps, self.potential, grid.h)
        q.update(gamma_norms(R, grid, self.delta))
        q["hm1"] = h_minus1_norm(R, grid.L)
        return q

    def add(self, t: float, R: np.ndarray, c_A: np.ndarray, frame: GridFrame) -> dict:
        q = self.snapshot(R, c_A, frame)
        if self._last is not None:
            t0, q0 = self._last
            for k in self._TIME_L2:
                self.integrals[k] += 0.5 * (t - t0) * (q0[k] + q[k])
        self.maxima["hm1"] = max(self.maxima["hm1"], q["hm1"])
        self.maxima["gamma_l2"] = max(self.maxima["gamma_l2"], math.sqrt(q["gamma_l2"]))
        self.maxima["l2"] = max(self.maxima["l2"], math.sqrt(q["l2"]))
        self._last = (t, q)
        self.count += 1
        return q

    def result(self) -> ErrorNorms:
        e, I = self.eps, self.integrals
        t = self._last[0] if self._last else 0.0

        def rt(x):
            return math.sqrt(max(x, 0.0))

        return ErrorNorms(
            eps=e, t_final=t, l2=rt(I["l2"]), tangential=rt(I["tangential"]), bulk_l2=rt(I["bulk_l2"]),
            bulk_grad_eps=e * rt(I["bulk_grad"]), normal_eps32=e ** 1.5 * rt(I["normal"]),
            hm1_linf=self.maxima["hm1"], spectral_energy=I["spectral"],
            gamma_l2_linf=self.maxima["gamma_l2"], gamma_lap_eps12=math.sqrt(e) * rt(I["gamma_lap"]),
            gamma_grad=rt(I["gamma_grad"]), gamma_r_grad=rt(I["gamma_r_grad"]), l2_linf=self.maxima["l2"])


def append_errors_csv(path, norms: ErrorNorms) -> None:
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(ErrorNorms.columns())
        w.writerow([repr(float(x)) for x in norms.row()])
        fh.flush()


def as_dict(norms: ErrorNorms) -> dict:
    return asdict(norms)
