"""Closed Fourier curves, tubular coordinates and discrete surface operators.

Conventions (fixed once, asserted in the tests): curves are stored counter-clockwise,
the unit normal is n = R90 tau and points into the enclosed region (the + phase), the
signed distance is positive inside, and the curvature of a circle of radius R is +1/R.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels

TWO_PI = 2.0 * np.pi
K_MAX = 32
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 20


class GeometryError(ValueError):
    """Invalid curve, chart, or query outside the tubular neighbourhood."""


def _rot90(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class InterfaceCurve:
    """Closed curve X0(s) = sum_k a_k cos(2 pi k s) + b_k sin(2 pi k s), s in [0, 1)."""

    def __init__(self, k, ax, bx, ay, by, n_samples: int = 2048, check_simple: bool = True):
        k = np.asarray(k, dtype=float)
        if k.ndim != 1 or np.any(k < 0) or np.any(k != np.round(k)):
            raise GeometryError("mode numbers must be non-negative integers")
        if k.max(initial=0) > K_MAX:
            raise GeometryError(f"at most {K_MAX} Fourier modes are supported")
        self.k = k
        self.ax, self.bx, self.ay, self.by = (np.asarray(a, dtype=float).copy() for a in (ax, bx, ay, by))
        self.bx[k == 0] = 0.0
        self.by[k == 0] = 0.0
        self.n_samples = int(n_samples)
        self.flipped = False
        s = np.arange(self.n_samples) / self.n_samples
        X = self.position(s)
        if self._signed_area(X) < 0:
            # reverse the parametrization s -> -s
            self.bx, self.by = -self.bx, -self.by
            self.flipped = True
        X, dX, _ = self.evaluate(s)
        speed = np.hypot(dX[:, 0], dX[:, 1])
        if speed.min() < 1e-12:
            raise GeometryError("degenerate parametrization (|X0'| vanishes)")
        self.s_samples = s
        self.samples = X
        if check_simple and not self._is_simple():
            raise GeometryError("curve self-intersects")

    # construction helpers
    @classmethod
    def circle(cls, R: float, center=(0.5, 0.5), **kw) -> "InterfaceCurve":
        return cls([0, 1], [center[0], R], [0, 0], [center[1], 0], [0, R], **kw)

    @classmethod
    def ellipse(cls, a: float, b: float, center=(0.5, 0.5), **kw) -> "InterfaceCurve":
        return cls([0, 1], [center[0], a], [0, 0], [center[1], 0], [0, b], **kw)

    @classmethod
    def perturbed_circle(cls, R: float, modes: dict, center=(0.5, 0.5), **kw) -> "InterfaceCurve":
        """r(s) = R (1 + sum_k a_k cos 2 pi k s), converted exactly to Fourier modes k +- 1."""
        kmax = max(list(modes) + [0]) + 1
        ks = np.arange(kmax + 1)
        ax, bx, ay, by = (np.zeros(kmax + 1) for _ in range(4))
        ax[0], ay[0] = center
        ax[1] += R
        by[1] += R
        for m, a in modes.items():
            if m < 1:
                raise GeometryError("perturbation modes start at 1")
            c = 0.5 * R * a
            ax[m + 1] += c
            by[m + 1] += c
            ax[m - 1] += c
            by[m - 1] -= c
        by[0] = 0.0
        return cls(ks, ax, bx, ay, by, **kw)

    @classmethod
    def from_csv(cls, path, **kw) -> "InterfaceCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4], **kw)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,ax,bx,ay,by\n")
            for row in zip(self.k.astype(int), self.ax, self.bx, self.ay, self.by):
                fh.write(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]) + "\n")

    # evaluation
    def evaluate(self, s):
        """Return X0, dX0/ds, d2X0/ds2 at parameters s (arrays of shape (..., 2))."""
        s = np.asarray(s, dtype=float)
        arg = TWO_PI * np.multiply.outer(s, self.k)
        co, si = np.cos(arg), np.sin(arg)
        w = TWO_PI * self.k
        X = np.stack([co @ self.ax + si @ self.bx, co @ self.ay + si @ self.by], axis=-1)
        dX = np.stack([(-si * w) @ self.ax + (co * w) @ self.bx,
                       (-si * w) @ self.ay + (co * w) @ self.by], axis=-1)
        w2 = w * w
        ddX = np.stack([-(co * w2) @ self.ax - (si * w2) @ self.bx,
                        -(co * w2) @ self.ay - (si * w2) @ self.by], axis=-1)
        return X, dX, ddX

    def position(self, s):
        return self.evaluate(s)[0]

    def speed(self, s):
        dX = self.evaluate(s)[1]
        return np.hypot(dX[..., 0], dX[..., 1])

    @staticmethod
    def _signed_area(X):
        x, y = X[:, 0], X[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def area(self) -> float:
        """Enclosed area by the Green formula with trapezoid quadrature (spectrally accurate)."""
        s = np.arange(4 * self.n_samples) / (4 * self.n_samples)
        X, dX, _ = self.evaluate(s)
        return 0.5 * float(np.mean(X[:, 0] * dX[:, 1] - X[:, 1] * dX[:, 0]))

    def length(self) -> float:
        s = np.arange(4 * self.n_samples) / (4 * self.n_samples)
        return float(np.mean(self.speed(s)))

    def _is_simple(self, n: int = 512) -> bool:
        s = np.arange(n) / n
        P = self.position(s)
        Q = np.roll(P, -1, axis=0)
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]

        def orient(a, b, c):
            return np.sign((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

        a, b, c, d = P[i], Q[i], P[j], Q[j]
        cross = (orient(a, b, c) != orient(a, b, d)) & (orient(c, d, a) != orient(c, d, b))
        return not bool(np.any(cross))

    @cached_property
    def max_abs_curvature(self) -> float:
        return float(np.max(np.abs(curvature(self, self.s_samples))))

    def min_self_distance(self) -> float:
        """Minimal distance between samples whose arc separation exceeds 0.9 pi / max|H|."""
        n = 512
        s = np.arange(n) / n
        P = self.position(s)
        ds = self.speed(s) / n
        arc = np.concatenate([[0.0], np.cumsum(ds)[:-1]])
        total = float(np.sum(ds))
        sep = np.abs(arc[:, None] - arc[None, :])
        sep = np.minimum(sep, total - sep)
        dist = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
        far = sep > 0.9 * np.pi / self.max_abs_curvature
        return float(dist[far].min()) if far.any() else np.inf


def tangent_normal(c: InterfaceCurve, s):
    """Unit tangent and normal n = R90 tau at parameters s."""
    dX = c.evaluate(s)[1]
    speed = np.hypot(dX[..., 0], dX[..., 1])
    if np.any(speed < 1e-12):
        raise GeometryError("degenerate parametrization (|X0'| vanishes)")
    tau = dX / speed[..., None]
    return tau, _rot90(tau)


def curvature(c: InterfaceCurve, s):
    """Signed curvature, positive for a counter-clockwise circle (H = 1/R)."""
    _, dX, ddX = c.evaluate(s)
    speed = np.hypot(dX[..., 0], dX[..., 1])
    if np.any(speed < 1e-12):
        raise GeometryError("degenerate parametrization (|X0'| vanishes)")
    return (dX[..., 0] * ddX[..., 1] - dX[..., 1] * ddX[..., 0]) / speed ** 3


@dataclass
class Projection:
    """Result of a nearest-point query on a batch of points."""

    s: np.ndarray
    d: np.ndarray
    newton_failed: np.ndarray
    outside_box: np.ndarray


@dataclass
class TubularChart:
    """Coordinates (r, s) -> X0(s) + r n(s) on the tube of half-width 2 delta."""

    curve: InterfaceCurve
    delta: float
    pad: float | None = None
    box: tuple = field(init=False)

    def __post_init__(self):
        if self.delta <= 0:
            raise GeometryError("delta must be positive")
        Hmax = self.curve.max_abs_curvature
        if 2 * self.delta >= 1.0 / Hmax:
            raise GeometryError(f"2 delta = {2 * self.delta} exceeds the curvature radius {1 / Hmax}")
        if 2 * self.delta >= 0.5 * self.curve.min_self_distance():
            raise GeometryError("2 delta exceeds half the minimal self-distance of the curve")
        if self.pad is None:
            self.pad = 4.0 * self.delta
        X = self.curve.samples
        self.box = (X[:, 0].min() - self.pad, X[:, 0].max() + self.pad,
                    X[:, 1].min() - self.pad, X[:, 1].max() + self.pad)

    @property
    def half_width(self) -> float:
        return 2.0 * self.delta

    def project(self, points) -> Projection:
        """Nearest-point parameter S(x) and signed distance d(x) for an (n, 2) array."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        x0, x1, y0, y1 = self.box
        inside = (P[:, 0] >= x0) & (P[:, 0] <= x1) & (P[:, 1] >= y0) & (P[:, 1] <= y1)
        n = P.shape[0]
        s = np.zeros(n)
        d = np.full(n, -self.pad)
        failed = np.zeros(n, dtype=bool)
        if inside.any():
            c = self.curve
            S = c.samples
            si, di, st = kernels.project_points(P[inside, 0], P[inside, 1], c.k, c.ax, c.bx, c.ay, c.by,
                                                np.ascontiguousarray(S[:, 0]), np.ascontiguousarray(S[:, 1]),
                                                NEWTON_MAX_ITER, NEWTON_TOL)
            s[inside], d[inside], failed[inside] = si, di, st != 0
        return Projection(s, d, failed, ~inside)

    def signed_distance(self, x):
        """Signed distance (positive inside); scalar in, scalar out."""
        pr = self.project(x)
        return float(pr.d[0]) if np.ndim(x) == 1 else pr.d

    def to_cartesian(self, r, s):
        X = self.curve.position(s)
        _, n = tangent_normal(self.curve, s)
        return X + np.asarray(r)[..., None] * n

    def chart_coords(self, x):
        """(r, s) with X0(s) + r n(s) = x; raises outside the tube of half-width 2 delta."""
        pr = self.project(x)
        if np.any(pr.outside_box) or np.any(np.abs(pr.d) >= self.half_width):
            raise GeometryError("point outside the tubular neighbourhood")
        if np.ndim(x) == 1:
            return float(pr.d[0]), float(pr.s[0])
        return pr.d, pr.s

    def jacobian_J(self, r, s):
        """|det D(r,s) X| = |X0'(s)| (1 - r H(s)), positive inside the chart."""
        r = np.asarray(r, dtype=float)
        if np.any(np.abs(r) >= self.half_width):
            raise GeometryError("|r| must stay below 2 delta")
        return self.curve.speed(s) * (1.0 - r * curvature(self.curve, s))

    def stretched_rho(self, x, eps: float, h=None):
        """(d(x) - eps h(S(x))) / eps."""
        if eps <= 0:
            raise GeometryError("eps must be positive")
        r, s = self.chart_coords(x)
        shift = 0.0 if h is None else h(s)
        return (r - eps * shift) / eps

    def grid_frame(self, grid) -> "GridFrame":
        """Chart quantities at all vertices of a Grid."""
        pr = self.project(grid.points)
        shape = (grid.N + 1, grid.N + 1)
        s = pr.s.reshape(shape)
        d = pr.d.reshape(shape)
        tau, n = tangent_normal(self.curve, s)
        H = curvature(self.curve, s)
        speed = self.curve.speed(s)
        return GridFrame(grid=grid, s=s, d=d, tau=tau, n=n, H=H, speed=speed,
                         in_chart=(np.abs(d) < self.half_width) & ~pr.outside_box.reshape(shape),
                         newton_failed=pr.newton_failed.reshape(shape))


@dataclass
class GridFrame:
    """Vertex-sampled chart data: S, d, tau(S), n(S), H(S), |X0'(S)| and the tube mask."""

    grid: object
    s: np.ndarray
    d: np.ndarray
    tau: np.ndarray
    n: np.ndarray
    H: np.ndarray
    speed: np.ndarray
    in_chart: np.ndarray
    newton_failed: np.ndarray

    @property
    def grad_S(self) -> np.ndarray:
        """tau / (|X0'| (1 - d H)), the gradient of the projected parameter."""
        return self.tau / (self.speed * (1.0 - self.d * self.H))[..., None]

    @property
    def kappa(self) -> np.ndarray:
        """-div n(S(x)) = H / (1 - d H)."""
        return self.H / (1.0 - self.d * self.H)


def grid_gradient(u, h: float) -> np.ndarray:
    """Second-order finite-difference gradient of a vertex field, shape (..., 2)."""
    gx, gy = np.gradient(u, h, edge_order=2)
    return np.stack([gx, gy], axis=-1)


def normal_derivative(u, frame: GridFrame) -> np.ndarray:
    return np.einsum("...k,...k->...", grid_gradient(u, frame.grid.h), frame.n)


def tangential_projection(g, n) -> np.ndarray:
    """(I - n x n) g for vector fields g, n of shape (..., 2)."""
    return g - np.einsum("...k,...k->...", g, n)[..., None] * n


def surface_gradient(u, frame: GridFrame) -> np.ndarray:
    """Tangential projection of the discrete gradient on all vertices (NaN outside the tube)."""
    out = tangential_projection(grid_gradient(u, frame.grid.h), frame.n)
    out[~frame.in_chart] = np.nan
    return out


def surface_gradient_at(u, grid, chart: TubularChart, x) -> np.ndarray:
    """Projected gradient of a bicubic interpolant of the vertex field u at a point x."""
    from scipy.interpolate import RectBivariateSpline

    x = np.asarray(x, dtype=float)
    margin = 2 * grid.h
    if np.any(x < margin) or np.any(x > grid.L - margin):
        raise GeometryError("point too close to the grid boundary for the stencil")
    r, s = chart.chart_coords(x)
    _, n = tangent_normal(chart.curve, s)
    spl = RectBivariateSpline(grid.nodes, grid.nodes, u, kx=3, ky=3)
    g = np.array([float(spl.ev(x[0], x[1], dx=1)), float(spl.ev(x[0], x[1], dy=1))])
    return g - (g @ n) * n


def surface_divergence(vx, vy, frame: GridFrame) -> np.ndarray:
    """(I - n x n) : grad v."""
    h = frame.grid.h
    gx = grid_gradient(vx, h)
    gy = grid_gradient(vy, h)
    n = frame.n
    div = gx[..., 0] + gy[..., 1]
    nn = (n[..., 0] * (n[..., 0] * gx[..., 0] + n[..., 1] * gx[..., 1])
          + n[..., 1] * (n[..., 0] * gy[..., 0] + n[..., 1] * gy[..., 1]))
    return div - nn


def commutator(u, frame: GridFrame):
    """[d_n, grad^Gamma] u from its definition and from -grad S (d_s n . grad^Gamma u)."""
    h = frame.grid.h
    n = frame.n
    gG = tangential_projection(grid_gradient(u, h), n)
    dn_gG = np.stack([np.einsum("...k,...k->...", grid_gradient(gG[..., m], h), n) for m in range(2)], axis=-1)
    du_n = normal_derivative(u, frame)
    defining = dn_gG - tangential_projection(grid_gradient(du_n, h), n)
    ds_n = -(frame.H * frame.speed)[..., None] * frame.tau
    closed = -frame.grad_S * np.einsum("...k,...k->...", ds_n, gG)[..., None]
    return defining, closed


def normal_velocity(curve_at, t: float, x, dt: float = 1e-5, delta: float = 0.02):
    """V = -d/dt d_Gamma(x, t) by a centred difference in time; curve_at(t) -> InterfaceCurve."""
    dp = TubularChart(curve_at(t + dt), delta).signed_distance(x)
    dm = TubularChart(curve_at(t - dt), delta).signed_distance(x)
    return -(np.asarray(dp) - np.asarray(dm)) / (2.0 * dt)


def distance_identities(chart: TubularChart, h: float, n_points: int = 64, rng=None) -> dict:
    """Finite-difference checks of the signed-distance identities on one curve.

    Returns maxima of | |grad d| - 1 | (fourth-order differences, step 1e-3, at random tube
    points), |Lap d + H| and |grad S . grad d| on the curve (five-point stencil of width h),
    the chart round-trip error, and the stencil tolerance 5 h^2 max|H|^3.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    c = chart.curve
    s = np.arange(n_points) / n_points
    X = c.position(s)
    off = np.array([[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    pr = chart.project((X[:, None, :] + off[None]).reshape(-1, 2))
    d = pr.d.reshape(-1, 5)
    S = np.unwrap(TWO_PI * pr.s.reshape(-1, 5), axis=1) / TWO_PI
    H = curvature(c, s)
    lap = (d[:, 1:].sum(axis=1) - 4.0 * d[:, 0]) / h ** 2
    gd = np.stack([d[:, 1] - d[:, 2], d[:, 3] - d[:, 4]], axis=-1) / (2 * h)
    gS = np.stack([S[:, 1] - S[:, 2], S[:, 3] - S[:, 4]], axis=-1) / (2 * h)

    # tube points for |grad d| and the round trip
    r = rng.uniform(-0.9, 0.9, n_points) * chart.half_width
    sr = rng.uniform(0.0, 1.0, n_points)
    P = chart.to_cartesian(r, sr)
    k = 1e-3
    w = np.array([1.0, -8.0, 8.0, -1.0]) / (12 * k)
    steps = np.array([-2.0, -1.0, 1.0, 2.0]) * k
    grad = np.zeros((n_points, 2))
    for ax in range(2):
        e = np.zeros(2)
        e[ax] = 1.0
        Q = (P[:, None, :] + steps[None, :, None] * e).reshape(-1, 2)
        grad[:, ax] = chart.project(Q).d.reshape(-1, 4) @ w
    rr, ss = chart.chart_coords(P)
    back = chart.to_cartesian(rr, ss)
    return {
        "grad_norm": float(np.max(np.abs(np.hypot(grad[:, 0], grad[:, 1]) - 1.0))),
        "laplacian": float(np.max(np.abs(lap + H))),
        "orthogonality": float(np.max(np.abs(np.sum(gd * gS, axis=-1)))),
        "round_trip": float(np.max(np.hypot(*(back - P).T))),
        "tolerance": 5.0 * h ** 2 * float(np.max(np.abs(H))) ** 3,
    }
