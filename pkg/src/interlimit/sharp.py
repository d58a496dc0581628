"""Radially symmetric sharp-interface reference and the leading-order diffuse ansatz.

For a disk of radius R centred in the domain, with the outer Dirichlet condition
mu = 0 imposed on the inscribed circle r = R_out, the limit system has v = 0 and

    mu+ = sigma / R                                   (r < R)
    mu-(r) = (sigma / R) ln(r / R_out) / ln(R / R_out)  (R < r < R_out)
    p+ - p- = 2 sigma / R,  p- = 0
    dR/dt = (1/2)[n . grad mu] = sigma / (2 R^2 ln(R / R_out)),

with n the outward normal of the disk and [g] = g(outside) - g(inside). The rate is
negative for R < R_out, so the disk shrinks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .fields import Grid
from .geometry import InterfaceCurve, TubularChart
from .potential import Potential, Profile, cutoff_xi, sigma as profile_sigma, solve_theta0, switch_eta


class CollapseError(RuntimeError):
    """Raised when the radius would cross zero inside a time step."""


def inscribed_radius(center, L: float = 1.0) -> float:
    """Radius of the largest disk about ``center`` inside [0, L]^2."""
    cx, cy = center
    return float(min(cx, cy, L - cx, L - cy))


@dataclass(frozen=True)
class RadialSharpState:
    R: float
    R_out: float
    sigma: float

    @property
    def mu_plus(self) -> float:
        return self.sigma / self.R

    @property
    def p_jump(self) -> float:
        return 2.0 * self.sigma / self.R

    @property
    def p_plus(self) -> float:
        return self.p_jump

    @property
    def p_minus(self) -> float:
        return 0.0

    def mu_minus(self, r):
        """Outer harmonic potential; the log formula is used beyond R_out as well."""
        r = np.asarray(r, dtype=float)
        out = self.mu_plus * np.log(r / self.R_out) / math.log(self.R / self.R_out)
        return float(out) if out.ndim == 0 else out

    def mu(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < self.R, self.mu_plus, self.mu_minus(np.maximum(r, 1e-300)))
        return float(out) if out.ndim == 0 else out

    def pressure(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < self.R, self.p_plus, self.p_minus)
        return float(out) if out.ndim == 0 else out

    def flux_jump(self) -> float:
        """[n . grad mu] with n pointing outward of the disk; mu+ is constant."""
        return self.mu_plus / (self.R * math.log(self.R / self.R_out))

    @property
    def dRdt(self) -> float:
        return radial_rate(self.R, self.sigma, self.R_out)


def radial_fields(R: float, sigma: float, R_out: float) -> RadialSharpState:
    if not (0.0 < R < R_out):
        raise ValueError(f"need 0 < R < R_out, got R = {R}, R_out = {R_out}")
    return RadialSharpState(float(R), float(R_out), float(sigma))


def radial_rate(R: float, sigma: float, R_out: float) -> float:
    return sigma / (2.0 * R * R * math.log(R / R_out))


def time_to_radius(R, R0: float, sigma: float, R_out: float):
    """Closed-form time at which the radius reaches R (inverse of the trajectory)."""
    def F(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = r ** 3 * np.log(r / R_out) / 3.0 - r ** 3 / 9.0
        return np.where(r > 0, val, 0.0)

    out = 2.0 * (F(R) - F(R0)) / sigma
    return float(out) if np.ndim(out) == 0 else out


def collapse_time(R0: float, sigma: float, R_out: float) -> float:
    return time_to_radius(0.0, R0, sigma, R_out) if sigma > 0 else math.inf


def exact_radius(t: float, R0: float, sigma: float, R_out: float) -> float:
    """R(t) from the closed-form inverse by root bracketing; 0 after collapse."""
    if sigma == 0.0 or t <= 0.0:
        return float(R0)
    if t >= collapse_time(R0, sigma, R_out):
        return 0.0
    return float(brentq(lambda r: time_to_radius(r, R0, sigma, R_out) - t, 0.0, R0, xtol=1e-15, rtol=1e-15))


@dataclass
class Trajectory:
    t: np.ndarray
    R: np.ndarray
    sigma: float
    R_out: float
    stopped: bool = False
    stop_reason: str = ""

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def radius(self, t):
        """Cubic Hermite interpolation using the ODE slopes; NaN beyond the last time."""
        t = np.asarray(t, dtype=float)
        T, R = self.t, self.R
        dR = np.array([radial_rate(r, self.sigma, self.R_out) for r in R]) if self.sigma else np.zeros_like(R)
        k = np.clip(np.searchsorted(T, t, side="right") - 1, 0, max(len(T) - 2, 0))
        if len(T) == 1:
            out = np.where(t == T[0], R[0], np.nan)
        else:
            hk = T[k + 1] - T[k]
            s = (t - T[k]) / hk
            h00 = 2 * s ** 3 - 3 * s ** 2 + 1
            h10 = s ** 3 - 2 * s ** 2 + s
            h01 = -2 * s ** 3 + 3 * s ** 2
            h11 = s ** 3 - s ** 2
            out = h00 * R[k] + h10 * hk * dR[k] + h01 * R[k + 1] + h11 * hk * dR[k + 1]
            out = np.where((t < T[0] - 1e-14) | (t > T[-1] + 1e-14), np.nan, out)
        return float(out) if out.ndim == 0 else out

    def state(self, t: float) -> RadialSharpState:
        R = self.radius(t)
        if not np.isfinite(R):
            raise ValueError(f"t = {t} outside the trajectory [0, {self.t_end}]")
        return radial_fields(R, self.sigma, self.R_out)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "R", "mu_plus", "p_jump"])
            for t, R in zip(self.t, self.R):
                w.writerow([repr(float(t)), repr(float(R)), repr(float(self.sigma / R)), repr(float(2 * self.sigma / R))])


def radial_evolve(R0: float, sigma: float, R_out: float, T: float, dt: float, r_min: float = 0.0) -> Trajectory:
    """Classical RK4 for dR/dt = sigma / (2 R^2 ln(R / R_out)).

    Integration stops early (``stopped`` set) once R < r_min. A stage that leaves
    (0, R_out) raises CollapseError.
    """
    if not (0.0 < R0 < R_out):
        raise ValueError(f"need 0 < R0 < R_out, got {R0}, {R_out}")
    if dt <= 0 or T < 0:
        raise ValueError("dt must be positive and T non-negative")
    n = int(math.ceil(T / dt - 1e-12))
    ts, Rs = [0.0], [float(R0)]
    R, t = float(R0), 0.0

    def rate(r):
        if not (0.0 < r < R_out):
            raise CollapseError(f"radius {r:.3e} left (0, R_out) near t = {t:.6g}")
        return radial_rate(r, sigma, R_out)

    for i in range(n):
        if R < r_min:
            return Trajectory(np.array(ts), np.array(Rs), sigma, R_out, True, f"R < {r_min:g}")
        h = min(dt, T - t)
        if sigma == 0.0:
            Rn = R
        else:
            k1 = rate(R)
            k2 = rate(R + 0.5 * h * k1)
            k3 = rate(R + 0.5 * h * k2)
            k4 = rate(R + h * k3)
            Rn = R + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            if Rn <= 0.0:
                raise CollapseError(f"radius crosses zero in the step starting at t = {t:.6g}")
        t = (i + 1) * dt if i + 1 < n else T
        R = Rn
        ts.append(t)
        Rs.append(R)
    stopped = R < r_min
    return Trajectory(np.array(ts), np.array(Rs), sigma, R_out, stopped, f"R < {r_min:g}" if stopped else "")


def compose_ansatz(traj: Trajectory | RadialSharpState, grid: Grid, pr: Profile, eps: float, t: float,
                   delta: float, center=None, chart: TubularChart | None = None):
    """Leading-order ansatz (c_A, mu_A) on the grid vertices at time t.

    c_A = xi(d) theta0(d/eps) + (1 - xi(d)) sign(d)
    mu_A = xi(d) (mu+ eta(d/eps) + mu-(r) (1 - eta(d/eps))) + (1 - xi(d)) mu_(+/-)

    with d the signed distance to the circle of radius R(t) (positive inside) and
    walls set to c = -1, mu = 0.
    """
    st = traj.state(t) if isinstance(traj, Trajectory) else traj
    L = grid.L
    center = (0.5 * L, 0.5 * L) if center is None else center
    if chart is None:
        chart = TubularChart(InterfaceCurve.circle(st.R, center), delta)
    else:
        R_chart = chart.curve.length() / (2 * math.pi)
        if abs(R_chart - st.R) > 1e-9 * max(1.0, st.R):
            raise ValueError(f"chart radius {R_chart:.6g} does not match R(t) = {st.R:.6g}")
    X = grid.points
    r = np.hypot(X[:, 0] - center[0], X[:, 1] - center[1])
    proj = chart.project(X)
    d = np.where(proj.outside_box, st.R - r, proj.d)
    xi = cutoff_xi(d, delta)
    rho = d / eps
    c = xi * pr.theta0(rho) + (1.0 - xi) * np.where(d > 0, 1.0, -1.0)
    mu_out = st.mu_minus(np.maximum(r, 1e-300))
    eta = switch_eta(rho)
    mu = xi * (st.mu_plus * eta + mu_out * (1.0 - eta)) + (1.0 - xi) * np.where(d > 0, st.mu_plus, mu_out)
    shape = (grid.N + 1, grid.N + 1)
    c = c.reshape(shape)
    mu = mu.reshape(shape)
    for a, val in ((c, -1.0), (mu, 0.0)):
        a[[0, -1], :] = val
        a[:, [0, -1]] = val
    return c, mu


def default_sigma(potential: Potential | None = None) -> float:
    return profile_sigma(solve_theta0(potential))
