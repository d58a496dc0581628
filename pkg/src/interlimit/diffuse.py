"""Time integration of the coupled Stokes / Cahn-Hilliard system.

Scheme (one step, Stokes lagged):

1. the state carries (c^n, mu^n) and the Stokes velocity v^n driven by mu^n grad c^n;
2. stabilized semi-implicit Cahn-Hilliard update, solved exactly with DST-I,

       (c' - c)/dt + T(v^n, c^n) = Lap_h mu'
       mu' = -eps Lap_h c' + f'(c^n)/eps + S (c' - c^n),   S = max f'' / eps;

3. Stokes solve with the capillary load of (c', mu').

The "bdf2" variant replaces step 2 by the second-order backward difference
(3 c' - 4 c^n + c^{n-1})/(2 dt) with extrapolated convection 2 T^n - T^{n-1} and the
explicit part of mu taken at c* = 2 c^n - c^{n-1}, stabilized by S (c' - c*). Its first
step uses the first-order update.

The capillary load is -D^T (mu c) - P^T (W c grad_h mu) and the convection T is its
exact discrete adjoint, so (mu, T(v, c))_h equals the Stokes dissipation of v and the
discrete energy balance closes up to the lag between mu^n and mu^{n+1}:

    E' - E = -dt (|grad mu'|^2 + Q(v^n)) - dt (mu' - mu^n, T) - numerical dissipation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from . import kernels
from .fields import Grid
from .geometry import InterfaceCurve, TubularChart
from .potential import Potential, Profile, cutoff_xi, solve_theta0
from .stokes import (StokesProblem, StokesSolution, divergence_operator, grad_velocity_sq, join_velocity,
                     korn_parts, n_vel, solve_stokes, split_velocity)

C_BOUND = 1.2
S_FLOOR = 1.1


class SolverFailure(RuntimeError):
    """Raised when a step cannot be completed (bound violation or linear solver failure)."""


@dataclass
class SimParams:
    eps: float
    N: int
    dt: float | None = None
    T: float = 0.05
    L: float = 1.0
    alpha0: float = 1.0
    delta: float = 0.045
    potential: Potential = field(default_factory=Potential)
    curve: InterfaceCurve | None = None
    stokes_tol: float = 1e-10
    stokes_method: str = "direct"
    snapshot_every: int = 0
    tension: float = 1.0
    scheme: str = "cs1"
    c_bound: float = C_BOUND

    def __post_init__(self):
        if self.curve is None:
            self.curve = InterfaceCurve.circle(0.25 * self.L, (0.5 * self.L, 0.5 * self.L))
        if self.dt is None:
            self.dt = 0.1 * self.eps * self.L / self.N

    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.L)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9))

    def validate(self) -> list[str]:
        """Raise ValueError on violated invariants; return soft warnings."""
        h = self.L / self.N
        if self.eps <= 0 or self.dt <= 0 or self.T < 0:
            raise ValueError("eps, dt must be positive and T non-negative")
        if self.eps < 3 * h:
            raise ValueError(f"eps = {self.eps} resolves fewer than 3 cells (h = {h})")
        if self.scheme not in ("cs1", "bdf2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.tension < 0:
            raise ValueError("tension scale must be non-negative")
        X = self.curve.samples
        gap = min(X[:, 0].min(), X[:, 1].min(), self.L - X[:, 0].max(), self.L - X[:, 1].max())
        if gap <= 5 * self.delta:
            raise ValueError(f"curve is {gap:.4f} from the boundary, needs more than 5 delta = {5 * self.delta}")
        notes = []
        if self.eps < 5 * h:
            notes.append(f"only {self.eps / h:.2f} cells per eps")
        return notes


@dataclass
class State:
    t: float
    c: np.ndarray
    mu: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    n: int = 0
    info: dict = field(default_factory=dict)
    c_prev: np.ndarray | None = None
    T_prev: np.ndarray | None = None

    @property
    def velocity(self) -> np.ndarray:
        return join_velocity(self.u, self.v)


# discrete operators --------------------------------------------------------------

@lru_cache(maxsize=4)
def _ops(N: int, L: float):
    h = L / N
    k = np.arange(1, N)
    lam1 = (4.0 / h ** 2) * np.sin(k * np.pi / (2 * N)) ** 2
    lam = lam1[:, None] + lam1[None, :]
    w1 = np.full(N + 1, h)
    w1[[0, -1]] *= 0.5
    W = np.outer(w1, w1).ravel()
    n = N + 1

    def node(i, j):
        return i * n + j

    # gradient at vertices: centred inside, one-sided on walls
    rows, cols, vals = [], [], []
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    I, J = I.ravel(), J.ravel()
    for comp, (A, B) in enumerate(((I, J), (J, I))):
        lo = A == 0
        hi = A == N
        mid = ~(lo | hi)

        def idx(a, b):
            return node(a, b) if comp == 0 else node(b, a)

        r = node(I, J) + comp * n * n
        for mask, plus, minus, scale in ((mid, A + 1, A - 1, 0.5 / h), (lo, A + 1, A, 1.0 / h), (hi, A, A - 1, 1.0 / h)):
            rows += [r[mask], r[mask]]
            cols += [idx(plus[mask], B[mask]), idx(minus[mask], B[mask])]
            vals += [np.full(mask.sum(), scale), np.full(mask.sum(), -scale)]
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n * n, n * n))

    # face velocities -> vertices
    rows, cols, vals = [], [], []
    nu = (N + 1) * N
    for i in range(n):
        for j in range(n):
            r = node(i, j)
            if j == 0:
                st = ((0, 1.5), (1, -0.5))
            elif j == N:
                st = ((N - 1, 1.5), (N - 2, -0.5))
            else:
                st = ((j - 1, 0.5), (j, 0.5))
            for jf, c in st:
                rows.append(r)
                cols.append(i * N + jf)
                vals.append(c)
            if i == 0:
                st = ((0, 1.5), (1, -0.5))
            elif i == N:
                st = ((N - 1, 1.5), (N - 2, -0.5))
            else:
                st = ((i - 1, 0.5), (i, 0.5))
            for iff, c in st:
                rows.append(r + n * n)
                cols.append(nu + iff * (N + 1) + j)
                vals.append(c)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n * n, n_vel(N)))
    return lam, W, G, P


def _dst(a):
    return sfft.dstn(a, type=1, norm="ortho")


def laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian at interior vertices (boundary values used as data)."""
    return (f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2] - 4.0 * f[1:-1, 1:-1]) / h ** 2


def grad_sq(f: np.ndarray) -> float:
    """Sum of squared edge differences = int |grad f|^2 for the five-point form."""
    return float(np.sum(np.diff(f, axis=0) ** 2) + np.sum(np.diff(f, axis=1) ** 2))


def energy(c, params: SimParams) -> float:
    """(eps/2) int |grad c|^2 + (1/eps) int f(c), edge-difference and trapezoid quadrature."""
    c = c.c if isinstance(c, State) else c
    h = params.L / params.N
    pot = params.potential
    _, W, _, _ = _ops(params.N, params.L)
    E = 0.5 * params.eps * grad_sq(c) + (W @ pot.f(c).ravel()) / params.eps
    return float(params.tension * E)


def chemical_potential(c: np.ndarray, params: SimParams) -> np.ndarray:
    h = params.L / params.N
    mu = np.zeros_like(c)
    mu[1:-1, 1:-1] = -params.eps * laplacian(c, h) + params.potential.df(c[1:-1, 1:-1]) / params.eps
    return params.tension * mu


def capillary_load(c: np.ndarray, mu: np.ndarray, params: SimParams) -> np.ndarray:
    """Load vector of (mu grad c, psi) split as grad(mu c) - c grad(mu)."""
    N, L = params.N, params.L
    _, W, G, P = _ops(N, L)
    mc = mu * c
    q = 0.25 * (mc[:-1, :-1] + mc[1:, :-1] + mc[:-1, 1:] + mc[1:, 1:])
    gm = G @ mu.ravel()
    cw = np.tile(W * c.ravel(), 2)
    return -(divergence_operator(N, L).T @ q.ravel()) - P.T @ (cw * gm)


def convection(c: np.ndarray, vel: np.ndarray, params: SimParams) -> np.ndarray:
    """Discrete div(c v) at the vertices, the adjoint of the capillary load (zero on walls)."""
    N, L = params.N, params.L
    _, W, G, P = _ops(N, L)
    flux = np.tile(W * c.ravel(), 2) * (P @ vel)
    T = -(G.T @ flux) / W
    T = T.reshape(N + 1, N + 1)
    T[[0, -1], :] = 0.0
    T[:, [0, -1]] = 0.0
    return T


def _stokes(c, mu, params: SimParams) -> StokesSolution:
    pb = StokesProblem(params.N, params.L, params.alpha0, force=capillary_load(c, mu, params))
    try:
        return solve_stokes(pb, tol=params.stokes_tol, method=params.stokes_method)
    except RuntimeError as exc:
        raise SolverFailure(f"Stokes solve failed: {exc}") from exc


# initial data and stepping -----------------------------------------------------

def initial_c(params: SimParams, pr: Profile, chart: TubularChart | None = None) -> np.ndarray:
    """xi(d) theta0(d/eps) + (1 - xi(d)) sign(d) on the vertices, c = -1 on the walls."""
    grid = params.grid
    chart = chart or TubularChart(params.curve, params.delta)
    d = chart.project(grid.points).d.reshape(grid.N + 1, grid.N + 1)
    xi = cutoff_xi(d, params.delta)
    c = xi * pr.theta0(d / params.eps) + (1.0 - xi) * np.where(d > 0, 1.0, -1.0)
    c[[0, -1], :] = -1.0
    c[:, [0, -1]] = -1.0
    return c


def init_state(params: SimParams, pr: Profile | None = None) -> State:
    params.validate()
    pr = pr or solve_theta0(params.potential)
    c = initial_c(params, pr)
    return state_from_c(c, params)


def state_from_c(c: np.ndarray, params: SimParams, t: float = 0.0) -> State:
    mu = chemical_potential(c, params)
    sol = _stokes(c, mu, params)
    return State(t, c, mu, sol.u, sol.v, sol.p, 0, {"stokes_residual": sol.residual})


def stabilization(c: np.ndarray, params: SimParams) -> float:
    bound = max(S_FLOOR, float(np.max(np.abs(c))))
    return params.potential.max_d2f(bound) / params.eps


def step(st: State, params: SimParams) -> State:
    """Advance one time step; returns the new state with per-step bookkeeping in ``info``.

    ``params.scheme`` selects the first-order energy-stable update ("cs1") or the
    second-order BDF2 variant ("bdf2") with stabilization S (c' - 2 c^n + c^{n-1}) and
    extrapolated explicit terms. The first BDF2 step falls back to "cs1".
    """
    N, L, eps, dt, s = params.N, params.L, params.eps, params.dt, params.tension
    h = L / N
    lam, W, _, _ = _ops(N, L)
    c0 = st.c
    vel = st.velocity
    Tc = convection(c0, vel, params)
    bdf2 = params.scheme == "bdf2" and st.c_prev is not None
    if params.scheme not in ("cs1", "bdf2"):
        raise ValueError(f"unknown scheme {params.scheme!r}")
    ci = c0[1:-1, 1:-1]
    if bdf2:
        cp = st.c_prev[1:-1, 1:-1]
        cstar = 2.0 * ci - cp
        S = stabilization(2.0 * c0 - st.c_prev, params)
        a = (4.0 * (ci + 1.0) - (cp + 1.0)) / (2.0 * dt) - (2.0 * Tc - st.T_prev)[1:-1, 1:-1]
        b = s * (params.potential.df(cstar) / eps - S * (cstar + 1.0))
        op = s * (eps * lam + S)
        uh = (_dst(a) - lam * _dst(b)) / (1.5 / dt + lam * op)
    else:
        S = stabilization(c0, params)
        # interior unknowns, u = c + 1 vanishes on the walls
        a = ci + 1.0 - dt * Tc[1:-1, 1:-1]
        b = s * (params.potential.df(ci) / eps - S * (ci + 1.0))
        op = s * (eps * lam + S)
        uh = (_dst(a) - dt * lam * _dst(b)) / (1.0 + dt * lam * op)
    u = _dst(uh)
    mu_i = _dst(op * uh) + b
    c = np.full_like(c0, -1.0)
    c[1:-1, 1:-1] = u - 1.0
    mu = np.zeros_like(c0)
    mu[1:-1, 1:-1] = mu_i
    cmax = float(np.max(np.abs(c)))
    if not np.isfinite(cmax) or cmax > params.c_bound:
        raise SolverFailure(f"max|c| = {cmax:.4f} exceeds {params.c_bound} at t = {st.t + dt:.6g}")
    sol = _stokes(c, mu, params)
    # energy bookkeeping
    E0 = energy(c0, params)
    E1 = energy(c, params)
    diss_mu = grad_sq(mu)
    interior, bnd = korn_parts(vel, N, L, params.alpha0)
    lag = float(W @ ((mu - st.mu) * Tc).ravel())
    num = E0 - E1 - dt * (diss_mu + interior + bnd) - dt * lag
    vmax = float(np.max(np.abs(vel), initial=0.0))
    idr, defect = (math.nan, math.nan) if bdf2 else _identity_residual(c0, c, mu, st.mu, Tc, S, params)
    info = {
        "E_prev": E0,
        "E": E1,
        "diss_mu": diss_mu,
        "diss_v": interior + bnd,
        "korn_interior": interior,
        "korn_boundary": bnd,
        "lag": lag,
        "numerical_dissipation": num,
        "identity_residual": idr,
        "identity_defect": defect,
        "stokes_residual": sol.residual,
        "cfl": dt * vmax / h,
        "cfl_violation": dt * vmax / h > 0.5,
        "dc_max": float(np.max(np.abs(c - c0))),
    }
    return State(st.t + dt, c, mu, sol.u, sol.v, sol.p, st.n + 1, info, c_prev=c0, T_prev=Tc)


def _identity_residual(c0, c1, mu1, mu0, Tc, S, params: SimParams) -> tuple[float, float]:
    """Relative and absolute defect of the exact discrete energy balance of one step.

    E1 - E0 = (mu1, dc)_h - (eps/2)|grad dc|^2 - sum w [S dc^2 - (f(c1) - f(c0) - f'(c0) dc)/eps]
    with (mu1, dc)_h = -dt |grad mu1|^2 - dt (mu1, T)_h from the update.
    """
    eps, dt, s = params.eps, params.dt, params.tension
    _, W, _, _ = _ops(params.N, params.L)
    pot = params.potential
    dc = c1 - c0
    lhs = energy(c1, params) - energy(c0, params)
    quad = (pot.f(c1) - pot.f(c0) - pot.df(c0) * dc) / eps
    num = s * (0.5 * eps * grad_sq(dc) + W @ (S * dc ** 2 - quad).ravel())
    pairing = -params.dt * grad_sq(mu1) - dt * float(W @ (mu1 * Tc).ravel())
    rhs = pairing - num
    scale = max(abs(lhs), abs(pairing), 1e-300)
    return abs(lhs - rhs) / scale, float(lhs - rhs)


# diagnostics ---------------------------------------------------------------

DIAG_COLUMNS = ["step", "t", "energy", "grad_mu_sq", "grad_v_sq", "boundary_v_sq", "mass", "max_v",
                "interface_length", "area_plus", "radius", "numerical_dissipation", "lag",
                "identity_residual", "identity_defect", "cfl"]


@dataclass
class DiagnosticsRow:
    step: int
    t: float
    energy: float
    grad_mu_sq: float
    grad_v_sq: float
    boundary_v_sq: float
    mass: float
    max_v: float
    interface_length: float
    area_plus: float
    radius: float
    numerical_dissipation: float = 0.0
    lag: float = 0.0
    identity_residual: float = 0.0
    identity_defect: float = 0.0
    cfl: float = 0.0

    def values(self) -> list:
        return [getattr(self, k) for k in DIAG_COLUMNS]


def mass(c: np.ndarray, params: SimParams) -> float:
    _, W, _, _ = _ops(params.N, params.L)
    return float(W @ c.ravel())


def interface_measures(c: np.ndarray, h: float):
    """(length of {c = 0}, area of {c > 0}, equivalent radius)."""
    length, area = kernels.contour_length_area(np.ascontiguousarray(c), h, 0.0)
    return float(length), float(area), math.sqrt(area / math.pi)


def diagnostics(st: State, st_prev: State | None, params: SimParams) -> DiagnosticsRow:
    """Row for the state ``st``; dissipation terms refer to the step st_prev -> st."""
    h = params.L / params.N
    length, area, radius = interface_measures(st.c, h)
    interior, bnd = korn_parts(st.velocity, params.N, params.L, params.alpha0)
    info = st.info if st_prev is not None else {}
    return DiagnosticsRow(
        step=st.n, t=st.t, energy=energy(st.c, params), grad_mu_sq=grad_sq(st.mu),
        grad_v_sq=grad_velocity_sq(st.u, st.v, h), boundary_v_sq=bnd, mass=mass(st.c, params),
        max_v=float(np.max(np.abs(st.velocity), initial=0.0)), interface_length=length, area_plus=area,
        radius=radius, numerical_dissipation=info.get("numerical_dissipation", 0.0),
        lag=info.get("lag", 0.0), identity_residual=info.get("identity_residual", 0.0),
        identity_defect=info.get("identity_defect", 0.0), cfl=info.get("cfl", 0.0))


def run(params: SimParams, pr: Profile | None = None, callback=None, state: State | None = None):
    """Integrate to params.T; ``callback(state, prev)`` is called after init and every step."""
    st = state or init_state(params, pr)
    if callback:
        callback(st, None)
    for _ in range(params.n_steps - st.n):
        prev, st = st, step(st, params)
        if callback:
            callback(st, prev)
    return st


def with_overrides(params: SimParams, **kw) -> SimParams:
    return replace(params, **kw)


def warn_resolution(params: SimParams) -> None:
    for note in params.validate():
        warnings.warn(note, RuntimeWarning, stacklevel=2)
