"""Run orchestration and file output for every CLI mode."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diffuse, sharp
from .config import RunConfig
from .diffuse import DIAG_COLUMNS, SimParams, State
from .fields import write_block
from .geometry import InterfaceCurve, TubularChart
from .norms import ErrorAccumulator, ErrorNorms, append_errors_csv
from .potential import Profile, null_mode_residual, sigma as profile_sigma, solve_theta0


class CheckFailure(RuntimeError):
    """A self-test mode finished but its acceptance check did not hold."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) if not isinstance(x, str) else x for x in r])


def sim_params(cfg: RunConfig, eps: float | None = None, N: int | None = None) -> SimParams:
    eps = cfg.eps if eps is None else eps
    N = cfg.N if N is None else N
    return SimParams(eps=eps, N=N, dt=cfg.dt_for(eps, N), T=cfg.T, L=cfg.L, alpha0=cfg.alpha0, delta=cfg.delta,
                     potential=cfg.potential, curve=cfg.curve(), stokes_tol=cfg.stokes_tol,
                     snapshot_every=cfg.snapshot_every, tension=cfg.tension, scheme=cfg.scheme, c_bound=cfg.c_bound)


# single diffuse run -------------------------------------------------------------

@dataclass
class RadialReference:
    """Sharp radial solution for a centred circle, used for radius and norm comparisons."""

    R0: float
    sigma: float
    R_out: float
    center: tuple
    trajectory: sharp.Trajectory

    def radius(self, t: float) -> float:
        return sharp.exact_radius(t, self.R0, self.sigma, self.R_out)


def radial_reference(cfg: RunConfig, pr: Profile, T: float | None = None) -> RadialReference | None:
    """Reference for circle initial data, or None for a general curve."""
    if cfg.curve_file:
        return None
    sig = cfg.tension * profile_sigma(pr)
    R_out = sharp.inscribed_radius(cfg.center, cfg.L)
    T = cfg.T if T is None else T
    traj = sharp.radial_evolve(cfg.radius, sig, R_out, T, cfg.sharp_dt, r_min=2.0 * cfg.delta)
    return RadialReference(cfg.radius, sig, R_out, cfg.center, traj)


@dataclass
class CaseResult:
    eps: float
    N: int
    dt: float
    steps: int
    state: State
    norms: ErrorNorms | None
    radius_rows: list = field(default_factory=list)
    wall_time: float = 0.0
    mass_drift: float = 0.0
    max_energy_increase: float = 0.0
    max_identity_residual: float = 0.0
    dissipation_total: float = 0.0
    identity_accumulated: float = 0.0
    initial_energy: float = 0.0

    @property
    def identity_relative(self) -> float:
        """|sum of per-step energy balance defects| / E(0)."""
        E0 = self.initial_energy
        return abs(self.identity_accumulated) / E0 if E0 > 0 else math.nan

    @property
    def radius_error_final(self) -> float:
        return abs(self.radius_rows[-1][3]) if self.radius_rows else math.nan

    @property
    def radius_error_sup(self) -> float:
        return max((abs(r[3]) for r in self.radius_rows), default=math.nan)


def run_case(params: SimParams, out_dir: str, pr: Profile | None = None, ref: RadialReference | None = None,
             error_every: float = 5e-4) -> CaseResult:
    """Integrate one diffuse run, writing diagnostics.csv (flushed per step), snapshots,
    radius.csv and errors.csv into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    pr = pr or solve_theta0(params.potential)
    t0 = time.perf_counter()
    acc = ErrorAccumulator(params.eps, params.delta, params.potential) if ref is not None else None
    every = max(1, int(round(error_every / params.dt)))
    h = params.L / params.N
    radius_rows = []
    stats = {"E_up": 0.0, "ident": 0.0, "diss": 0.0, "defect": 0.0, "E0": None, "m0": None, "m": None}

    def record_errors(st: State):
        R_s = ref.radius(st.t)
        _, _, R_d = diffuse.interface_measures(st.c, h)
        radius_rows.append((st.t, R_d, R_s, R_d - R_s))
        traj = ref.trajectory
        if st.t <= traj.t_end + 1e-12 and R_s > 2.0 * params.delta:
            chart = TubularChart(InterfaceCurve.circle(R_s, ref.center), params.delta)
            st_ref = sharp.radial_fields(R_s, ref.sigma, ref.R_out) if ref.sigma > 0 else \
                sharp.RadialSharpState(R_s, ref.R_out, 0.0)
            c_A, _ = sharp.compose_ansatz(st_ref, params.grid, pr, params.eps, st.t, params.delta,
                                          center=ref.center, chart=chart)
            acc.add(st.t, st.c - c_A, c_A, chart.grid_frame(params.grid))

    diag_path = os.path.join(out_dir, "diagnostics.csv")
    with open(diag_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)

        def callback(st: State, prev: State | None):
            row = diffuse.diagnostics(st, prev, params)
            w.writerow([_fmt(x) for x in row.values()])
            fh.flush()
            if stats["m0"] is None:
                stats["m0"] = row.mass
                stats["E0"] = row.energy
            stats["m"] = row.mass
            if prev is not None:
                info = st.info
                stats["E_up"] = max(stats["E_up"], info["E"] - info["E_prev"])
                if np.isfinite(info["identity_residual"]):
                    stats["ident"] = max(stats["ident"], abs(info["identity_residual"]))
                    stats["defect"] += info["identity_defect"]
                stats["diss"] += params.dt * (info["diss_mu"] + info["diss_v"])
            if params.snapshot_every and st.n % params.snapshot_every == 0:
                write_block(os.path.join(out_dir, f"snap_{st.n:06d}_c.ilfb"), st.c)
                write_block(os.path.join(out_dir, f"snap_{st.n:06d}_mu.ilfb"), st.mu)
            if ref is not None and (st.n % every == 0 or st.n == params.n_steps):
                record_errors(st)

        st = diffuse.run(params, pr, callback)
    res = CaseResult(params.eps, params.N, params.dt, st.n, st, acc.result() if acc else None, radius_rows,
                     time.perf_counter() - t0, stats["m"] - stats["m0"], stats["E_up"], stats["ident"],
                     stats["diss"], stats["defect"], stats["E0"])
    if acc is not None:
        err_path = os.path.join(out_dir, "errors.csv")
        if os.path.exists(err_path):
            os.remove(err_path)
        append_errors_csv(err_path, res.norms)
        _write_rows(os.path.join(out_dir, "radius.csv"), ["t", "R_diffuse", "R_sharp", "error"], radius_rows)
    return res


def run_simulate(cfg: RunConfig, out_dir: str) -> CaseResult:
    params = sim_params(cfg)
    for note in params.validate():
        print(f"warning: {note}")
    pr = solve_theta0(params.potential)
    ref = radial_reference(cfg, pr)
    return run_case(params, out_dir, pr, ref, cfg.error_every)


# convergence study ---------------------------------------------------------------

NORM_COLUMNS = [c for c in ErrorNorms.columns() if c not in ("eps", "t_final")]


def fit_order(eps, values):
    """Least-squares slope of log(value) against log(eps) and the RMS log residual."""
    x = np.log(np.asarray(eps, dtype=float))
    v = np.abs(np.asarray(values, dtype=float))
    if len(x) < 3:
        raise ValueError("order fit needs at least 3 points")
    if not np.all(np.isfinite(v) & (v > 0)):
        return math.nan, math.nan
    y = np.log(v)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(math.sqrt(np.mean(resid ** 2)))


@dataclass
class ConvergenceTable:
    rows: list
    orders: dict

    def order(self, name: str) -> float:
        return self.orders[name][0]

    def residual(self, name: str) -> float:
        return self.orders[name][1]


def _converge_member(args):
    cfg, eps, out_dir = args
    N = cfg.grid_for(eps)
    params = sim_params(cfg, eps=eps, N=N)
    pr = solve_theta0(params.potential)
    ref = radial_reference(cfg, pr)
    res = run_case(params, out_dir, pr, ref, cfg.error_every)
    return {"eps": eps, "N": N, "dt": params.dt, "steps": res.steps, "norms": res.norms,
            "radius_err_final": res.radius_error_final, "radius_err_sup": res.radius_error_sup,
            "mass_drift": res.mass_drift, "wall_time": res.wall_time}


CONV_HEADER = ["eps", "N", "dt", "steps", "t_final"] + NORM_COLUMNS + ["radius_err_final", "radius_err_sup",
                                                                       "mass_drift"]


def run_converge(cfg: RunConfig, out_dir: str) -> ConvergenceTable:
    """Diffuse runs over cfg.eps_list against the radial sharp reference; fitted orders per norm.

    Writes convergence.csv, orders.csv, timing.csv and summary.txt; each member run has its
    own subdirectory. A failed member aborts the study after flushing the finished rows.
    """
    cfg.validate()
    if len(cfg.eps_list) < 3:
        raise ValueError("need at least 3 eps values")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(cfg, e, os.path.join(out_dir, f"eps_{e:g}")) for e in cfg.eps_list]
    rows = []

    def flush():
        _write_rows(os.path.join(out_dir, "convergence.csv"), CONV_HEADER,
                    [[r["eps"], r["N"], r["dt"], r["steps"], r["norms"].t_final]
                     + [getattr(r["norms"], k) for k in NORM_COLUMNS]
                     + [r["radius_err_final"], r["radius_err_sup"], r["mass_drift"]] for r in rows])
        _write_rows(os.path.join(out_dir, "timing.csv"), ["eps", "wall_time"],
                    [[r["eps"], r["wall_time"]] for r in rows])

    try:
        if cfg.threads > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.threads, len(jobs))) as pool:
                for r in pool.map(_converge_member, jobs):
                    rows.append(r)
        else:
            for j in jobs:
                rows.append(_converge_member(j))
    finally:
        if rows:
            flush()
    eps = [r["eps"] for r in rows]
    orders = {k: fit_order(eps, [getattr(r["norms"], k) for r in rows]) for k in NORM_COLUMNS}
    orders["radius_err_final"] = fit_order(eps, [r["radius_err_final"] for r in rows])
    orders["radius_err_sup"] = fit_order(eps, [r["radius_err_sup"] for r in rows])
    _write_rows(os.path.join(out_dir, "orders.csv"), ["norm", "order", "fit_residual"],
                [[k, v[0], v[1]] for k, v in orders.items()])
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("eps sweep: " + ", ".join(f"{e:g}" for e in eps) + "\n")
        for k, (o, r) in orders.items():
            fh.write(f"{k:>18s}  order {o:7.3f}  fit residual {r:.3f}\n")
    return ConvergenceTable(rows, orders)


# self-test and utility modes -------------------------------------------------------

def run_profile(cfg: RunConfig, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    pr = solve_theta0(cfg.potential)
    pr.to_csv(os.path.join(out_dir, "profile.csv"))
    sig = profile_sigma(pr)
    res = float(np.max(np.abs(pr.ode_residual())))
    null = null_mode_residual(pr)
    report = {"sigma": sig, "ode_residual": res, "null_mode_residual": null}
    if cfg.potential.is_default():
        rho = np.linspace(-12, 12, 2401)
        report["tanh_error"] = float(np.max(np.abs(pr.theta0(rho) - np.tanh(rho / math.sqrt(2)))))
        report["sigma_error"] = abs(sig - math.sqrt(2) / 3)
    _write_rows(os.path.join(out_dir, "profile_report.csv"), ["quantity", "value"], list(report.items()))
    if res > 1e-8 or report.get("tanh_error", 0.0) > 1e-8 or report.get("sigma_error", 0.0) > 1e-6:
        raise CheckFailure(f"profile check failed: {report}")
    return report


def run_stokes_check(cfg: RunConfig, out_dir: str) -> dict:
    from .stokes import Manufactured, StokesProblem, solve_stokes

    os.makedirs(out_dir, exist_ok=True)
    rows = []
    zero = solve_stokes(StokesProblem(min(cfg.stokes_grids), cfg.L, cfg.alpha0))
    zmax = float(max(np.max(np.abs(zero.u)), np.max(np.abs(zero.v)), np.max(np.abs(zero.p))))
    ms = Manufactured(cfg.L, cfg.alpha0)
    for N in cfg.stokes_grids:
        sol = solve_stokes(ms.problem(N), tol=cfg.stokes_tol)
        ev, ep = ms.errors(sol, N)
        rows.append((N, ev, ep, sol.residual))
    order = fit_order([1.0 / r[0] for r in rows], [r[1] for r in rows])[0] if len(rows) >= 3 else math.nan
    _write_rows(os.path.join(out_dir, "stokes_check.csv"), ["N", "velocity_l2_error", "pressure_l2_error",
                                                            "residual"], rows)
    report = {"zero_max": zmax, "velocity_order": order}
    if zmax != 0.0 or not (order >= 1.9):
        raise CheckFailure(f"stokes check failed: {report}")
    return report


def run_spectral(cfg: RunConfig, out_dir: str) -> dict:
    from . import spectral

    os.makedirs(out_dir, exist_ok=True)
    pot = cfg.potential
    rows, C = spectral.eigen_sweep(cfg.spectral_eps, cfg.spectral_delta, pot)
    spectral.write_eigen_csv(os.path.join(out_dir, "spectral_1d.csv"), rows, C)
    params = sim_params(cfg)
    pr = solve_theta0(pot)
    chart = TubularChart(params.curve, params.delta)
    frame = chart.grid_frame(params.grid)
    c_A = diffuse.initial_c(params, pr, chart)
    rng = np.random.default_rng(cfg.seed)
    samples = [spectral.random_zero_trace(params.grid, rng) for _ in range(cfg.n_samples)]
    samples.append(spectral.near_null_mode(frame, pr, params.eps, params.delta))
    ev, C1, C2 = spectral.spectral_lower_bound_2d(c_A, frame, params.eps, params.delta, samples, pot)
    spectral.write_bound_csv(os.path.join(out_dir, "spectral_2d.csv"), ev, C1, C2)
    ok = C1 > 0 and math.isfinite(C2) and all(s.lhs >= C1 * s.aggregate - C2 * s.hm1_sq - 1e-12 for s in ev)
    ok = ok and all(lam >= -C * e - 1e-15 for e, lam, _ in rows)
    report = {"C_fit": C, "C1": C1, "C2": C2}
    if not ok:
        raise CheckFailure(f"spectral check failed: {report}")
    return report


def run_sharp(cfg: RunConfig, out_dir: str) -> sharp.Trajectory:
    os.makedirs(out_dir, exist_ok=True)
    pr = solve_theta0(cfg.potential)
    sig = cfg.tension * profile_sigma(pr)
    R_out = sharp.inscribed_radius(cfg.center, cfg.L)
    eps_min = min(cfg.eps_list) if cfg.mode == "converge" else cfg.eps
    traj = sharp.radial_evolve(cfg.radius, sig, R_out, cfg.T, cfg.sharp_dt, r_min=4.0 * eps_min)
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    return traj


GNUPLOT = {
    "simulate": ("diagnostics.gp", """set datafile separator ','
set key autotitle columnhead
set xlabel 't'
plot 'diagnostics.csv' using 2:3 with lines title 'energy'
"""),
    "converge": ("convergence.gp", """set datafile separator ','
set key autotitle columnhead
set logscale xy
set xlabel 'eps'
plot 'convergence.csv' using 1:6 with linespoints, '' using 1:11 with linespoints
"""),
    "sharp": ("trajectory.gp", """set datafile separator ','
set key autotitle columnhead
set xlabel 't'
plot 'trajectory.csv' using 1:2 with lines
"""),
    "spectral": ("spectral.gp", """set datafile separator ','
set key autotitle columnhead
plot 'spectral_1d.csv' using 1:2 with linespoints
"""),
}


def write_gnuplot(mode: str, out_dir: str) -> str | None:
    if mode not in GNUPLOT:
        return None
    name, body = GNUPLOT[mode]
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(body)
    return path
