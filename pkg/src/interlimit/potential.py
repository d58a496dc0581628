"""Double-well potential, optimal profile, surface tension and cut-off functions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

TOL_PROFILE = 1e-8


@dataclass(frozen=True)
class Potential:
    """Quartic f(s) = a4 s^4 + a3 s^3 + a2 s^2 + a1 s + a0."""

    a4: float = 0.25
    a3: float = 0.0
    a2: float = -0.5
    a1: float = 0.0
    a0: float = 0.25

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.a4, self.a3, self.a2, self.a1, self.a0])

    def f(self, s):
        return np.polyval(self.coeffs, s)

    def df(self, s):
        return np.polyval(np.polyder(self.coeffs, 1), s)

    def d2f(self, s):
        return np.polyval(np.polyder(self.coeffs, 2), s)

    def d3f(self, s):
        return np.polyval(np.polyder(self.coeffs, 3), s)

    @property
    def d4f(self) -> float:
        return 24.0 * self.a4

    def is_default(self) -> bool:
        return self == Potential()

    def max_d2f(self, bound: float) -> float:
        """Maximum of f'' over [-bound, bound] (f'' is convex when f'''' > 0)."""
        return float(max(self.d2f(-bound), self.d2f(bound), self.d2f(0.0)))


def validate_potential(p: Potential, atol: float = 1e-12) -> list[str]:
    """Return the list of violated well conditions; empty when `p` is admissible."""
    report = []
    if abs(p.f(1.0)) > atol or abs(p.f(-1.0)) > atol:
        report.append("f(+-1) != 0")
    if abs(p.df(1.0)) > atol or abs(p.df(-1.0)) > atol:
        report.append("f'(+-1) != 0")
    if not (p.d2f(1.0) > 0 and p.d2f(-1.0) > 0):
        report.append("f''(+-1) <= 0")
    if abs(p.a3) > atol or abs(p.a1) > atol:
        report.append("not symmetric")
    if not p.d4f > 0:
        report.append("f'''' <= 0")
    s = np.linspace(-3.0, 3.0, 6001)
    away = np.abs(np.abs(s) - 1.0) > 1e-6
    if np.any(p.f(s[away]) <= 0):
        report.append("f not positive away from +-1")
    return report


def decay_rate(p: Potential) -> float:
    """Exponential decay rate used for the profile tails, strictly inside the admissible range."""
    return 0.9 * float(min(np.sqrt(p.d2f(-1.0)), np.sqrt(p.d2f(1.0))))


@dataclass
class Profile:
    rho: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    ddtheta: np.ndarray
    alpha: float
    c_tail: float
    analytic: bool
    potential: Potential = field(default_factory=Potential)

    @property
    def spacing(self) -> float:
        return float(self.rho[1] - self.rho[0])

    @property
    def rho_max(self) -> float:
        return float(self.rho[-1])

    def ode_residual(self) -> np.ndarray:
        """|-theta'' + f'(theta)| at every sample from the tabulated second derivative."""
        return np.abs(-self.ddtheta + self.potential.df(self.theta))

    def reduction_residual(self) -> np.ndarray:
        """|theta' - sqrt(2 f(theta))| on interior samples, theta' by sixth-order differences of theta.

        Independent of the tabulated derivatives; insensitive to rounding in theta.
        """
        th, h = self.theta, self.spacing
        c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / (60.0 * h)
        d1 = sum(c[k] * th[k:len(th) - 6 + k] for k in range(7))
        return np.abs(d1 - np.sqrt(2.0 * np.maximum(self.potential.f(th[3:-3]), 0.0)))

    def tail_bound(self) -> np.ndarray:
        return self.c_tail * np.exp(-self.alpha * np.abs(self.rho))

    # Evaluation away from the samples; tails beyond the window use the limits.
    def theta0(self, rho):
        if self.analytic:
            return np.tanh(np.asarray(rho) / np.sqrt(2.0))
        rho = np.asarray(rho, dtype=float)
        out = CubicHermiteSpline(self.rho, self.theta, self.dtheta, extrapolate=False)(rho)
        return np.where(rho < self.rho[0], -1.0, np.where(rho > self.rho[-1], 1.0, out))

    def dtheta0(self, rho):
        if self.analytic:
            return 1.0 / (np.sqrt(2.0) * np.cosh(np.asarray(rho) / np.sqrt(2.0)) ** 2)
        rho = np.asarray(rho, dtype=float)
        out = CubicHermiteSpline(self.rho, self.dtheta, self.ddtheta, extrapolate=False)(rho)
        return np.where((rho < self.rho[0]) | (rho > self.rho[-1]), 0.0, out)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rho", "theta0", "dtheta0", "ddtheta0"])
            for row in zip(self.rho, self.theta, self.dtheta, self.ddtheta):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, potential: Potential | None = None) -> "Profile":
        potential = potential or Potential()
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        rho, th, dth, ddth = data.T
        alpha = decay_rate(potential)
        return cls(rho, th, dth, ddth, alpha, _fit_tail(rho, th, dth, alpha),
                   potential.is_default(), potential)


def _fit_tail(rho, theta, dtheta, alpha) -> float:
    return float(np.max((np.abs(theta ** 2 - 1.0) + np.abs(dtheta)) * np.exp(alpha * np.abs(rho))))


def solve_theta0(p: Potential | None = None, rho_max: float = 12.0, n: int = 2001,
                 numeric: bool = False) -> Profile:
    """Tabulate the monotone heteroclinic profile on [-rho_max, rho_max].

    The default quartic uses tanh(rho/sqrt 2) unless ``numeric`` is set. Other admissible
    quartics integrate the first-order reduction theta' = sqrt(2 f(theta)) from
    theta(0) = 0 and reflect.
    """
    p = p or Potential()
    problems = validate_potential(p)
    if problems:
        raise ValueError(f"inadmissible potential: {problems}")
    if n < 1001 or n % 2 == 0:
        raise ValueError("n must be odd and >= 1001")
    if rho_max < 10:
        raise ValueError("rho_max must be >= 10")
    rho = np.linspace(-rho_max, rho_max, n)
    if p.is_default() and not numeric:
        u = rho / np.sqrt(2.0)
        th = np.tanh(u)
        sech2 = 1.0 / np.cosh(u) ** 2
        dth = sech2 / np.sqrt(2.0)
        ddth = -th * sech2
        analytic = True
    else:
        half = rho[n // 2:]
        # theta stays below 1 for all finite rho; clip guards the sqrt against rounding.
        # f = q (1 - s^2)^2 + r(s); the factored form avoids cancellation near the wells
        q, r = np.polydiv(p.coeffs, [1.0, 0.0, -2.0, 0.0, 1.0])
        q = float(q[-1])
        r = [float(x) for x in r]

        def rhs(_, y):
            s = min(y[0], 1.0)
            w = 1.0 - s * s
            rem = 0.0
            for a in r:
                rem = rem * s + a
            return [math.sqrt(2.0 * max(q * w * w + rem, 0.0))]

        sol = solve_ivp(rhs, (0.0, rho_max), [0.0], t_eval=half, method="DOP853",
                        rtol=1e-13, atol=1e-15)
        if not sol.success or sol.y.shape[1] != half.size:
            raise RuntimeError(f"profile quadrature did not converge: {sol.message}")
        th_half = sol.y[0]
        if np.any(np.diff(th_half) < 0) or th_half[-1] < 0.99:
            raise RuntimeError("profile quadrature did not converge to the well at +1")
        th = np.concatenate([-th_half[:0:-1], th_half])
        dth = np.sqrt(2.0 * np.maximum(p.f(th), 0.0))
        ddth = p.df(th)
        analytic = False
    alpha = decay_rate(p)
    return Profile(rho, th, dth, ddth, alpha, _fit_tail(rho, th, dth, alpha), analytic, p)


def sigma(pr: Profile) -> float:
    """Surface tension 1/2 * int theta0'^2 over the real line.

    Trapezoid rule on the window plus an exponential-tail correction fitted to the last samples.
    """
    g = pr.dtheta ** 2
    core = np.trapezoid(g, pr.rho)
    tail = 0.0
    for end, nxt in ((-1, -2), (0, 1)):
        if g[end] > 0 and g[nxt] > g[end]:
            rate = np.log(g[nxt] / g[end]) / abs(pr.rho[nxt] - pr.rho[end])
            tail += g[end] / rate
    return 0.5 * float(core + tail)


def null_mode_residual(pr: Profile) -> float:
    """Max of |-theta0''' + f''(theta0) theta0'| with theta0''' from a centred second difference."""
    d = pr.dtheta
    h = pr.spacing
    d3 = (d[2:] - 2.0 * d[1:-1] + d[:-2]) / h ** 2
    return float(np.max(np.abs(-d3 + pr.potential.d2f(pr.theta[1:-1]) * d[1:-1])))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def _dsmoothstep(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)


def cutoff_xi(s, delta: float):
    """C^2 cut-off: 1 on |s| <= delta, 0 on |s| >= 2 delta, quintic in between."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    t = (np.abs(s) - delta) / delta
    out = 1.0 - _smoothstep(t)
    return float(out) if np.ndim(out) == 0 else out


def cutoff_xi_prime(s, delta: float):
    if delta <= 0:
        raise ValueError("delta must be positive")
    s = np.asarray(s, dtype=float)
    t = (np.abs(s) - delta) / delta
    out = -np.sign(s) * _dsmoothstep(t) / delta
    return float(out) if np.ndim(out) == 0 else out


def switch_eta(rho):
    """Monotone switch: 0 on (-inf, -1], 1 on [1, inf)."""
    out = _smoothstep((np.asarray(rho, dtype=float) + 1.0) / 2.0)
    return float(out) if np.ndim(out) == 0 else out
