"""Spectral checks for the linearized Cahn-Hilliard operator around the layer profile.

1D: the form q(psi) = int eps psi'^2 + f''(theta0((r - eps h)/eps)) psi^2 / eps on (-delta, delta)
with finite differences and a lumped mass; its smallest eigenvalue sits just below 0 with an
eigenvector close to theta0'.

2D: the quadratic form of c_A on sampled zero-trace fields psi is compared with the norm
aggregate

    A(psi) = eps |psi|^2 + |psi|^2_{out} / eps + eps |grad^G psi|^2_{layer}
             + eps^3 |grad psi|^2 + eps |grad psi|^2_{out}

and |psi|^2_{H^-1}; constants C1, C2 with LHS >= C1 A - C2 |psi|^2_{H^-1} are fitted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import eigh_tridiagonal, solve_banded

from .fields import Grid
from .geometry import GridFrame, TubularChart, grid_gradient, surface_gradient
from .norms import cell_integral, h_minus1_norm, layer_mask
from .potential import Potential, Profile, cutoff_xi, solve_theta0


class EigenError(RuntimeError):
    pass


@dataclass
class QuadraticForm1D:
    eps: float
    delta: float
    n: int | None = None
    shift: float = 0.0
    potential: Potential = field(default_factory=Potential)
    profile: Profile | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.eps <= 0 or self.delta <= 0:
            raise ValueError("eps and delta must be positive")
        if self.n is None:
            # d rho <= 5e-4, at least 401 nodes
            self.n = max(401, int(math.ceil(2 * self.delta / (5e-4 * self.eps))) + 1)
        dr = 2 * self.delta / (self.n - 1)
        if self.n < 400 or self.eps / dr < 20:
            raise ValueError(f"need >= 400 nodes and >= 20 per eps (n = {self.n}, eps/dr = {self.eps / dr:.1f})")
        if self.profile is None:
            self.profile = solve_theta0(self.potential)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(-self.delta, self.delta, self.n)

    @property
    def dr(self) -> float:
        return 2 * self.delta / (self.n - 1)

    def potential_weights(self) -> np.ndarray:
        if self.weights is not None:
            return np.broadcast_to(np.asarray(self.weights, dtype=float), (self.n,)).copy()
        rho = (self.r - self.eps * self.shift) / self.eps
        return self.potential.d2f(self.profile.theta0(rho)) / self.eps

    def tridiagonal(self, bc: str = "dirichlet"):
        """(diag, offdiag, mass) of the stiffness + potential matrix and lumped mass."""
        n, dr, eps = self.n, self.dr, self.eps
        w = self.potential_weights()
        m = np.full(n, dr)
        diag = np.full(n, 2 * eps / dr)
        if bc == "neumann":
            m[[0, -1]] *= 0.5
            diag[[0, -1]] = eps / dr
        elif bc != "dirichlet":
            raise ValueError(f"unknown boundary condition {bc!r}")
        diag = diag + m * w
        off = np.full(n - 1, -eps / dr)
        if bc == "dirichlet":
            return diag[1:-1], off[1:-1], m[1:-1]
        return diag, off, m

    def value(self, psi: np.ndarray) -> float:
        """q(psi) for nodal values on the full grid (trapezoid mass)."""
        dr = self.dr
        m = np.full(self.n, dr)
        m[[0, -1]] *= 0.5
        return float(self.eps * np.sum(np.diff(psi) ** 2) / dr + np.sum(m * self.potential_weights() * psi ** 2))


def min_eigenvalue_1d(q: QuadraticForm1D, bc: str = "dirichlet", tol: float = 1e-10):
    """Smallest eigenvalue of K x = lam M x and its M-normalized eigenvector on the full grid.

    LAPACK bisection on the symmetrically scaled tridiagonal matrix, refined by
    shifted inverse iteration until the relative residual is below ``tol``.
    """
    d, e, m = q.tridiagonal(bc)
    s = 1.0 / np.sqrt(m)
    a = d * s * s
    b = e * s[:-1] * s[1:]
    lam, vec = eigh_tridiagonal(a, b, select="i", select_range=(0, 0))
    lam, y = float(lam[0]), vec[:, 0]

    def apply(x):
        out = a * x
        out[:-1] += b * x[1:]
        out[1:] += b * x[:-1]
        return out

    scale = max(np.max(np.abs(a)), 1.0)
    res = np.linalg.norm(apply(y) - lam * y) / scale
    for _ in range(5):
        if res <= tol:
            break
        sigma = lam - 1e-9 * scale
        ab = np.zeros((3, len(a)))
        ab[0, 1:] = b
        ab[1] = a - sigma
        ab[2, :-1] = b
        y = solve_banded((1, 1), ab, y)
        y /= np.linalg.norm(y)
        lam = float(y @ apply(y))
        res = np.linalg.norm(apply(y) - lam * y) / scale
    if res > tol:
        raise EigenError(f"eigen residual {res:.2e} above {tol:.0e}")
    x = y * s
    if bc == "dirichlet":
        x = np.concatenate([[0.0], x, [0.0]])
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return lam, x, res


def eigen_correlation(q: QuadraticForm1D, vec: np.ndarray) -> float:
    """Normalized inner product of an eigenvector with theta0'((r - eps h)/eps)."""
    g = q.profile.dtheta0((q.r - q.eps * q.shift) / q.eps)
    return float(abs(vec @ g) / (np.linalg.norm(vec) * np.linalg.norm(g)))


def eigen_sweep(eps_list, delta: float = 0.5, potential: Potential | None = None, bc: str = "dirichlet"):
    """Rows (eps, lambda_min, correlation) and the single constant C with lambda >= -C eps."""
    pot = potential or Potential()
    pr = solve_theta0(pot)
    rows = []
    for e in eps_list:
        q = QuadraticForm1D(e, delta, potential=pot, profile=pr)
        lam, vec, _ = min_eigenvalue_1d(q, bc)
        rows.append((float(e), lam, eigen_correlation(q, vec)))
    C = max(max(-lam / e for e, lam, _ in rows), 0.0)
    return rows, C


def write_eigen_csv(path, rows, C: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "lambda_min", "C_fit"])
        for e, lam, _ in rows:
            w.writerow([repr(e), repr(lam), repr(C)])


# 2D ------------------------------------------------------------------------------

@dataclass
class SpectralSample:
    lhs: float
    terms: dict
    hm1_sq: float

    @property
    def aggregate(self) -> float:
        return float(sum(self.terms.values()))


def quadratic_form(psi: np.ndarray, c_A: np.ndarray, eps: float, potential: Potential, h: float) -> float:
    g = grid_gradient(psi, h)
    return cell_integral(eps * np.sum(g * g, axis=-1) + potential.d2f(c_A) * psi * psi / eps, h)


def spectral_terms(psi: np.ndarray, c_A: np.ndarray, frame: GridFrame, eps: float, delta: float,
                   potential: Potential) -> SpectralSample:
    grid = frame.grid
    h = grid.h
    if np.any(psi[[0, -1], :] != 0.0) or np.any(psi[:, [0, -1]] != 0.0):
        raise ValueError("psi must vanish on the boundary")
    mask = layer_mask(frame, delta)
    g = grid_gradient(psi, h)
    gsq = np.sum(g * g, axis=-1)
    sg = np.nan_to_num(np.sum(surface_gradient(psi, frame) ** 2, axis=-1), nan=0.0)
    p2 = psi * psi
    terms = {
        "l2": eps * cell_integral(p2, h),
        "l2_out": cell_integral(p2, h, ~mask) / eps,
        "tangential": eps * cell_integral(sg, h, mask),
        "grad": eps ** 3 * cell_integral(gsq, h),
        "grad_out": eps * cell_integral(gsq, h, ~mask),
    }
    lhs = quadratic_form(psi, c_A, eps, potential, h)
    return SpectralSample(lhs, terms, h_minus1_norm(psi, grid.L) ** 2)


def fit_constants(samples: list[SpectralSample]):
    """C1 = half the smallest positive LHS / A ratio; C2 the least value that closes every sample."""
    ratios = [s.lhs / s.aggregate for s in samples if s.lhs > 0 and s.aggregate > 0]
    if not ratios:
        raise ValueError("no sample with a positive quadratic form")
    C1 = 0.5 * min(ratios)
    C2 = max(max((C1 * s.aggregate - s.lhs) / s.hm1_sq, 0.0) for s in samples)
    return C1, C2


def random_zero_trace(grid: Grid, rng: np.random.Generator, n_modes: int = 6) -> np.ndarray:
    """Random smooth field: sine series with decaying coefficients, zero on the walls."""
    X, Y = grid.mesh
    L = grid.L
    psi = np.zeros_like(X)
    for k in range(1, n_modes + 1):
        for l in range(1, n_modes + 1):
            a = rng.standard_normal() / (k * k + l * l)
            psi += a * np.sin(k * np.pi * X / L) * np.sin(l * np.pi * Y / L)
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    return psi


def near_null_mode(frame: GridFrame, pr: Profile, eps: float, delta: float, amp: float = 0.3,
                   mode: int = 2) -> np.ndarray:
    """eps^{-1/2} theta0'(d/eps) (1 + amp cos(2 pi mode S)) cut off outside Gamma(2 delta)."""
    d = np.where(frame.in_chart, frame.d, 2 * delta)
    psi = eps ** -0.5 * pr.dtheta0(d / eps) * (1 + amp * np.cos(2 * np.pi * mode * frame.s)) * cutoff_xi(d, delta)
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    return psi


def spectral_lower_bound_2d(c_A: np.ndarray, frame: GridFrame, eps: float, delta: float, samples,
                            potential: Potential | None = None):
    """Evaluate every sample, fit (C1, C2) and return (samples, C1, C2)."""
    pot = potential or Potential()
    ev = [spectral_terms(psi, c_A, frame, eps, delta, pot) for psi in samples]
    C1, C2 = fit_constants(ev)
    return ev, C1, C2


def write_bound_csv(path, samples: list[SpectralSample], C1: float, C2: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "lhs", "rhs", "C1", "C2"])
        for i, s in enumerate(samples):
            w.writerow([i, repr(s.lhs), repr(C1 * s.aggregate - C2 * s.hm1_sq), repr(C1), repr(C2)])


# layer decomposition --------------------------------------------------------------

@dataclass
class LayerDecomposition:
    s: np.ndarray
    rho: np.ndarray
    Z: np.ndarray
    beta: np.ndarray
    psi: np.ndarray
    remainder: np.ndarray
    J: np.ndarray
    eps: float

    def _l2(self, a) -> float:
        ds = self.s[1] - self.s[0]
        w = _trap_weights(self.rho) * self.eps
        return float(math.sqrt(np.sum(a * a * self.J * w[None, :]) * ds))

    @property
    def psi_norm(self) -> float:
        return self._l2(self.psi)

    @property
    def remainder_norm(self) -> float:
        return self._l2(self.remainder)

    @property
    def Z_l2(self) -> float:
        return float(math.sqrt(np.sum(self.Z ** 2) * (self.s[1] - self.s[0])))

    @property
    def Z_h1(self) -> float:
        k = np.fft.rfftfreq(len(self.s), d=self.s[1] - self.s[0]) * 2 * np.pi
        dZ = np.fft.irfft(1j * k * np.fft.rfft(self.Z), n=len(self.s))
        return float(math.sqrt(self.Z_l2 ** 2 + np.sum(dZ ** 2) * (self.s[1] - self.s[0])))

    @property
    def beta_max(self) -> float:
        return float(np.max(self.beta))

    def orthogonality(self, pr: Profile) -> float:
        """max_s |(remainder, theta0')_J| / (|remainder|_J |theta0'|_J)."""
        w = _trap_weights(self.rho)[None, :] * self.J
        g = pr.dtheta0(self.rho)[None, :]
        num = np.abs(np.sum(self.remainder * g * w, axis=1))
        den = np.sqrt(np.sum(self.remainder ** 2 * w, axis=1) * np.sum(g * g * w, axis=1))
        return float(np.max(num / np.maximum(den, 1e-300)))


def _trap_weights(x):
    w = np.empty_like(x)
    dx = np.diff(x)
    w[0], w[-1] = dx[0] / 2, dx[-1] / 2
    w[1:-1] = 0.5 * (dx[:-1] + dx[1:])
    return w


def decompose_layer(psi: np.ndarray, grid: Grid, chart: TubularChart, pr: Profile, eps: float,
                    shift: float = 0.0, n_s: int = 256, n_rho: int = 401) -> LayerDecomposition:
    """Projection of psi on eps^{-1/2} beta(s) theta0'(rho) in each normal fibre, J-weighted.

    psi is sampled on (rho, s) in I_eps x [0, 1) through a bicubic spline of the vertex
    field; Z(s) makes the remainder J-orthogonal to theta0' in every fibre.
    """
    delta = chart.delta
    if 4 * eps / grid.h < 10:
        raise ValueError(f"fewer than 10 grid nodes across the layer (4 eps / h = {4 * eps / grid.h:.1f})")
    s = np.arange(n_s) / n_s
    rho = np.linspace(-delta / eps - shift, delta / eps - shift, n_rho)
    r = eps * (rho + shift)
    S, Rr = np.meshgrid(s, r, indexing="ij")
    P = chart.to_cartesian(Rr.ravel(), S.ravel())
    spl = RectBivariateSpline(grid.nodes, grid.nodes, psi, kx=3, ky=3)
    vals = spl.ev(P[:, 0], P[:, 1]).reshape(n_s, n_rho)
    J = chart.jacobian_J(Rr, S)
    w = _trap_weights(rho)
    g = pr.dtheta0(rho)
    beta = np.full(n_s, np.sum(g * g * w) ** -0.5)
    phi = eps ** -0.5 * beta[:, None] * g[None, :]
    Z = np.sum(vals * phi * J * w, axis=1) / np.sum(phi * phi * J * w, axis=1)
    rem = vals - Z[:, None] * phi
    return LayerDecomposition(s, rho, Z, beta, vals, rem, J, eps)
