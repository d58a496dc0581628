"""Stationary Stokes solver on a staggered grid with the slip/traction boundary condition.

The discrete operator is assembled from the quadratic form

    Q(w) = 2 * int |D_s w|^2 dx + alpha0 * int_{boundary} |w|^2 ds

so that the momentum block is symmetric positive definite and the saddle system

    [ A  -D^T ] [v]   [b]
    [ -D   0  ] [p] = [-h^2 g]

is symmetric. D is h^2 times the cell divergence. e_xx, e_yy live at cell centres, e_xy
at the vertices (one-sided second-order differences on the walls), and tangential wall
velocities are extrapolated linearly from the first two interior faces. The traction
condition is natural in this form; no pressure normalization is needed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import Grid


class StokesError(RuntimeError):
    pass


# index bookkeeping -----------------------------------------------------------

def n_u(N):
    return (N + 1) * N


def n_vel(N):
    return 2 * (N + 1) * N


def _ui(N, i, j):
    return i * N + j


def _vi(N, i, j):
    return n_u(N) + i * (N + 1) + j


def split_velocity(x, N):
    u = x[: n_u(N)].reshape(N + 1, N)
    v = x[n_u(N): n_vel(N)].reshape(N, N + 1)
    return u, v


def join_velocity(u, v):
    return np.concatenate([np.ravel(u), np.ravel(v)])


def _trap(N, h):
    w = np.full(N + 1, h)
    w[[0, -1]] *= 0.5
    return w


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def _dnode(N, h):
    """Derivative across the staggered direction at vertices k = 0..N.

    Returns (node k, face offset, coefficient) triplets; faces sit at (k + 1/2) h.
    """
    rows, cols, vals = [], [], []
    for k in range(N + 1):
        if k == 0:
            st = ((0, -2.0), (1, 3.0), (2, -1.0))
        elif k == N:
            st = ((N - 1, 2.0), (N - 2, -3.0), (N - 3, 1.0))
        else:
            st = ((k, 1.0), (k - 1, -1.0))
        for kf, c in st:
            rows.append(k)
            cols.append(kf)
            vals.append(c / h)
    return np.array(rows), np.array(cols), np.array(vals)


@lru_cache(maxsize=8)
def strain_operators(N: int, L: float):
    """Sparse maps velocity -> (e_xx, e_yy at cells; e_xy at vertices) and their weights."""
    h = L / N
    nv = n_vel(N)
    I, J = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    cell = (I * N + J).ravel()
    Exx = _coo([cell, cell], [_ui(N, I + 1, J).ravel(), _ui(N, I, J).ravel()],
               [np.full(N * N, 1 / h), np.full(N * N, -1 / h)], (N * N, nv))
    Eyy = _coo([cell, cell], [_vi(N, I, J + 1).ravel(), _vi(N, I, J).ravel()],
               [np.full(N * N, 1 / h), np.full(N * N, -1 / h)], (N * N, nv))
    # e_xy = (du/dy + dv/dx) / 2 at vertex (i, j)
    kk, kf, cv = _dnode(N, h)
    rows, cols, vals = [], [], []
    for i in range(N + 1):
        # du/dy: u[i, jf] along j
        rows.append(i * (N + 1) + kk)
        cols.append(_ui(N, i, kf))
        vals.append(0.5 * cv)
    for j in range(N + 1):
        # dv/dx: v[if, j] along i
        rows.append(kk * (N + 1) + j)
        cols.append(_vi(N, kf, j))
        vals.append(0.5 * cv)
    Exy = _coo(rows, cols, vals, ((N + 1) ** 2, nv))
    wc = np.full(N * N, h * h)
    wn = np.outer(_trap(N, h), _trap(N, h)).ravel()
    return Exx, Eyy, Exy, wc, wn


@lru_cache(maxsize=8)
def boundary_trace(N: int, L: float):
    """Trace operator B (velocity -> wall samples) and quadrature weights.

    Row order: normal components on the four walls at face midpoints (left, right,
    bottom, top; N each), then tangential components at the wall vertices (N+1 each).
    """
    h = L / N
    j = np.arange(N)
    m = np.arange(N + 1)
    rows, cols, vals, w = [], [], [], []
    r0 = 0

    def add(rr, cc, vv):
        rows.append(rr)
        cols.append(cc)
        vals.append(vv)

    for idx in (_ui(N, 0, j), _ui(N, N, j), _vi(N, j, 0), _vi(N, j, N)):
        add(r0 + j, idx, np.ones(N))
        w.append(np.full(N, h))
        r0 += N
    tw = _trap(N, h)
    for a, b in ((_vi(N, 0, m), _vi(N, 1, m)), (_vi(N, N - 1, m), _vi(N, N - 2, m)),
                 (_ui(N, m, 0), _ui(N, m, 1)), (_ui(N, m, N - 1), _ui(N, m, N - 2))):
        add(r0 + m, a, np.full(N + 1, 1.5))
        add(r0 + m, b, np.full(N + 1, -0.5))
        w.append(tw)
        r0 += N + 1
    B = _coo(rows, cols, vals, (r0, n_vel(N)))
    return B, np.concatenate(w)


@lru_cache(maxsize=8)
def divergence_operator(N: int, L: float):
    """h^2 * cell divergence, shape (N^2, n_vel)."""
    h = L / N
    I, J = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    cell = (I * N + J).ravel()
    ones = np.full(N * N, h)
    return _coo([cell] * 4,
                [_ui(N, I + 1, J).ravel(), _ui(N, I, J).ravel(), _vi(N, I, J + 1).ravel(), _vi(N, I, J).ravel()],
                [ones, -ones, ones, -ones], (N * N, n_vel(N)))


@lru_cache(maxsize=8)
def momentum_operator(N: int, L: float, alpha0: float):
    Exx, Eyy, Exy, wc, wn = strain_operators(N, L)
    B, wb = boundary_trace(N, L)
    A = 2.0 * (Exx.T @ sp.diags(wc) @ Exx + Eyy.T @ sp.diags(wc) @ Eyy + 2.0 * Exy.T @ sp.diags(wn) @ Exy)
    A = A + alpha0 * (B.T @ sp.diags(wb) @ B)
    return sp.csr_matrix(A)


def face_weights(N: int, L: float) -> np.ndarray:
    """Quadrature weights of the face unknowns (h^2 inside, h^2/2 on the walls)."""
    h = L / N
    wu = np.outer(_trap(N, h), np.full(N, h))
    return join_velocity(wu, wu.T)


def face_coordinates(N: int, L: float):
    h = L / N
    xn = np.arange(N + 1) * h
    xc = (np.arange(N) + 0.5) * h
    Xu, Yu = np.meshgrid(xn, xc, indexing="ij")
    Xv, Yv = np.meshgrid(xc, xn, indexing="ij")
    return (Xu, Yu), (Xv, Yv)


def wall_samples(N: int, L: float, func):
    """Evaluate ``func(x, y, nx, ny) -> (tx, ty)`` in the boundary-trace row order.

    Returns the projected component per row (normal component on normal rows, tangential
    on tangential rows), matching ``boundary_trace``.
    """
    h = L / N
    yc = (np.arange(N) + 0.5) * h
    xn = np.arange(N + 1) * h
    zeros_c, zeros_n = np.zeros(N), np.zeros(N + 1)
    out = []
    normal = [((zeros_c, yc), (-1.0, 0.0), 0), ((zeros_c + L, yc), (1.0, 0.0), 0),
              ((yc, zeros_c), (0.0, -1.0), 1), ((yc, zeros_c + L), (0.0, 1.0), 1)]
    for (x, y), (nx, ny), comp in normal:
        t = func(x, y, nx, ny)
        out.append(t[comp])
    tang = [((zeros_n, xn), (-1.0, 0.0), 1), ((zeros_n + L, xn), (1.0, 0.0), 1),
            ((xn, zeros_n), (0.0, -1.0), 0), ((xn, zeros_n + L), (0.0, 1.0), 0)]
    for (x, y), (nx, ny), comp in tang:
        t = func(x, y, nx, ny)
        out.append(t[comp])
    return np.concatenate(out)


# problem / solution ----------------------------------------------------------

@dataclass
class StokesProblem:
    """Discrete Stokes data.

    fu, fv: body force sampled at the u- and v-faces; ``force`` adds an already
    integrated load vector (e.g. the capillary functional). g: divergence data at cell
    centres. ``traction``: wall samples in ``boundary_trace`` order of the extra stress
    t_b in (-2 D_s v + p I) n = alpha0 v + t_b.
    """

    N: int
    L: float = 1.0
    alpha0: float = 1.0
    fu: np.ndarray | None = None
    fv: np.ndarray | None = None
    g: np.ndarray | None = None
    force: np.ndarray | None = None
    traction: np.ndarray | None = None

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        Grid(self.N, self.L)

    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.L)

    def load(self) -> np.ndarray:
        N, L = self.N, self.L
        b = np.zeros(n_vel(N))
        if self.fu is not None or self.fv is not None:
            fu = np.zeros((N + 1, N)) if self.fu is None else self.fu
            fv = np.zeros((N, N + 1)) if self.fv is None else self.fv
            b += face_weights(N, L) * join_velocity(fu, fv)
        if self.force is not None:
            b += self.force
        if self.traction is not None:
            B, wb = boundary_trace(N, L)
            b -= B.T @ (wb * self.traction)
        return b

    def divergence_rhs(self) -> np.ndarray:
        if self.g is None:
            return np.zeros(self.N * self.N)
        return -self.grid.h ** 2 * np.ravel(self.g)


@dataclass
class StokesSolution:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    residual: float
    div_residual: float
    iterations: int
    method: str
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def velocity(self) -> np.ndarray:
        return join_velocity(self.u, self.v)


@lru_cache(maxsize=4)
def saddle_matrix(N: int, L: float, alpha0: float):
    A = momentum_operator(N, L, alpha0)
    D = divergence_operator(N, L)
    return sp.bmat([[A, -D.T], [-D, None]], format="csc")


@lru_cache(maxsize=2)
def _factor(N: int, L: float, alpha0: float):
    return spla.splu(saddle_matrix(N, L, alpha0), permc_spec="COLAMD")


def clear_caches() -> None:
    for f in (_factor, saddle_matrix, momentum_operator, strain_operators, boundary_trace, divergence_operator):
        f.cache_clear()


def solve_stokes(pb: StokesProblem, tol: float = 1e-10, method: str = "direct") -> StokesSolution:
    """Solve the discrete Stokes system with a cached sparse LU.

    One refinement sweep is applied when the first residual is above tol / 100.
    Raises StokesError when the relative residual exceeds ``tol``.
    """
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-14, 1e-6]")
    N, L, a0 = pb.N, pb.L, float(pb.alpha0)
    t0 = time.perf_counter()
    rhs = np.concatenate([pb.load(), pb.divergence_rhs()])
    K = saddle_matrix(N, L, a0)
    nrm = np.linalg.norm(rhs)
    if nrm == 0.0:
        x = np.zeros_like(rhs)
        its, used = 0, "trivial"
    elif method == "direct":
        lu = _factor(N, L, a0)
        x = lu.solve(rhs)
        its, used = 0, "direct"
        r = rhs - K @ x
        if np.linalg.norm(r) > 0.01 * tol * nrm:
            x += lu.solve(r)
            its = 1
    else:
        raise ValueError(f"unknown method {method!r}")
    r = np.linalg.norm(K @ x - rhs) / nrm if nrm > 0 else 0.0
    if r > tol:
        raise StokesError(f"relative residual {r:.3e} above tolerance {tol:.1e}")
    nv = n_vel(N)
    u, v = split_velocity(x[:nv], N)
    D = divergence_operator(N, L)
    divres = float(np.max(np.abs(D @ x[:nv] + pb.divergence_rhs()), initial=0.0)) / (L / N) ** 2
    return StokesSolution(u.copy(), v.copy(), x[nv:].reshape(N, N).copy(), float(r), divres, its, used,
                          time.perf_counter() - t0)


# forms and diagnostics -------------------------------------------------------

def korn_parts(vel: np.ndarray, N: int, L: float, alpha0: float):
    """(2 int |D_s v|^2, alpha0 int_boundary |v|^2) for a stacked face velocity."""
    Exx, Eyy, Exy, wc, wn = strain_operators(N, L)
    B, wb = boundary_trace(N, L)
    exx, eyy, exy = Exx @ vel, Eyy @ vel, Exy @ vel
    interior = 2.0 * (wc @ exx ** 2 + wc @ eyy ** 2 + 2.0 * (wn @ exy ** 2))
    bnd = alpha0 * (wb @ (B @ vel) ** 2)
    return float(interior), float(bnd)


def korn_form(vel: np.ndarray, N: int, L: float, alpha0: float) -> float:
    """2 int |D_s v|^2 + alpha0 int_boundary |v|^2."""
    return sum(korn_parts(vel, N, L, alpha0))


def korn_constant(N: int, L: float = 1.0, alpha0: float = 1.0) -> float:
    """Smallest C with korn_form(v) >= C ||v||^2 over all face velocities.

    Generalized eigenvalue of the momentum operator against the face mass matrix.
    """
    A = momentum_operator(N, L, float(alpha0)).tocsc()
    w = face_weights(N, L)
    lam = spla.eigsh(A, k=1, M=sp.diags(w).tocsc(), sigma=0.0, which="LM", return_eigenvectors=False)
    return float(lam[0])


def random_smooth_velocity(rng: np.random.Generator, L: float = 1.0, n_modes: int = 4):
    """Random trigonometric velocity field ``func(x, y) -> (u, v)`` with modes up to n_modes."""
    k = np.arange(n_modes + 1)
    amp = rng.standard_normal((2, 2, 2, n_modes + 1, n_modes + 1)) / (1.0 + k[:, None] ** 2 + k[None, :] ** 2)

    def basis(z):
        arg = np.pi * k * np.asarray(z, dtype=float)[..., None] / L
        return np.cos(arg), np.sin(arg)

    def func(x, y):
        cx, sx = basis(x)
        cy, sy = basis(y)
        out = []
        for m in amp:
            tx = (cx, sx)
            ty = (cy, sy)
            s = sum(np.einsum("...a,ab,...b->...", tx[i], m[0, i] * m[1, j], ty[j])
                    for i in range(2) for j in range(2))
            out.append(s)
        return out[0], out[1]

    return func


def korn_ratio_min(N: int, funcs, L: float = 1.0, alpha0: float = 1.0) -> float:
    """min over funcs of korn_form(v) / ||v||^2 with v sampled on the N grid."""
    ratios = []
    for fn in funcs:
        vel = sample_velocity(N, L, fn)
        ratios.append(korn_form(vel, N, L, alpha0) / velocity_l2(vel, N, L) ** 2)
    return float(min(ratios))


def velocity_l2(vel: np.ndarray, N: int, L: float) -> float:
    return float(np.sqrt(face_weights(N, L) @ vel ** 2))


def grad_velocity_sq(u: np.ndarray, v: np.ndarray, h: float) -> float:
    """int |grad v|^2 from difference quotients between neighbouring faces."""
    s = 0.0
    for a in (u, v):
        s += np.sum(np.diff(a, axis=0) ** 2) + np.sum(np.diff(a, axis=1) ** 2)
    return float(s)


def sample_velocity(N: int, L: float, func) -> np.ndarray:
    """Sample func(x, y) -> (u, v) at the staggered faces."""
    (Xu, Yu), (Xv, Yv) = face_coordinates(N, L)
    return join_velocity(func(Xu, Yu)[0], func(Xv, Yv)[1])


# manufactured solution -----------------------------------------------------------

@dataclass(frozen=True)
class Manufactured:
    """Divergence-free v* = curl(sin(a x) sin(b y)) and p* = cos(a x) cos(b y)."""

    L: float = 1.0
    alpha0: float = 1.0
    ka: float = 1.0
    kb: float = 2.0

    @property
    def a(self):
        return self.ka * np.pi / self.L

    @property
    def b(self):
        return self.kb * np.pi / self.L

    def velocity(self, x, y):
        a, b = self.a, self.b
        return b * np.sin(a * x) * np.cos(b * y), -a * np.cos(a * x) * np.sin(b * y)

    def pressure(self, x, y):
        return np.cos(self.a * x) * np.cos(self.b * y)

    def force(self, x, y):
        a, b = self.a, self.b
        u, v = self.velocity(x, y)
        k2 = a * a + b * b
        return (k2 * u - a * np.sin(a * x) * np.cos(b * y), k2 * v - b * np.cos(a * x) * np.sin(b * y))

    def strain(self, x, y):
        a, b = self.a, self.b
        exx = a * b * np.cos(a * x) * np.cos(b * y)
        exy = 0.5 * (a * a - b * b) * np.sin(a * x) * np.sin(b * y)
        return exx, -exx, exy

    def traction(self, x, y, nx, ny):
        """(-2 D_s v* + p* I) n - alpha0 v* on the wall with outward normal n."""
        exx, eyy, exy = self.strain(x, y)
        p = self.pressure(x, y)
        u, v = self.velocity(x, y)
        tx = (-2 * exx + p) * nx - 2 * exy * ny - self.alpha0 * u
        ty = -2 * exy * nx + (-2 * eyy + p) * ny - self.alpha0 * v
        return tx, ty

    def problem(self, N: int) -> StokesProblem:
        (Xu, Yu), (Xv, Yv) = face_coordinates(N, self.L)
        return StokesProblem(N, self.L, self.alpha0, fu=self.force(Xu, Yu)[0], fv=self.force(Xv, Yv)[1],
                             traction=wall_samples(N, self.L, self.traction))

    def errors(self, sol: StokesSolution, N: int):
        """(L2 velocity error, L2 pressure error) against the exact fields."""
        exact = sample_velocity(N, self.L, self.velocity)
        ev = velocity_l2(sol.velocity - exact, N, self.L)
        g = Grid(N, self.L)
        Xc, Yc = np.meshgrid(g.centres, g.centres, indexing="ij")
        ep = float(np.sqrt(np.sum((sol.p - self.pressure(Xc, Yc)) ** 2)) * g.h)
        return ev, ep
