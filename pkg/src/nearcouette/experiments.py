"""Experiment drivers behind the command line.

Each driver takes a validated :class:`RunConfig`, an output directory and
an executor (``map`` must keep input order), writes its tables, snapshots
and plots, and returns the acceptance checks it evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from . import report
from .config import RunConfig
from .evolution import (
    default_dt,
    fit_rate,
    homogeneous_split,
    project_moments,
    run_direct,
    run_frozen,
)
from .ghost import build_ghost, commutator_check, operator_norm, pairing_defects, smooth_random_field, transfer_probe
from .nonlinear import stability_boundary, threshold_sweep
from .resolvent import evaluate_point, sweep_lambdas
from .shear import ShearModel, heat_extend, parse_shear_spec
from .spectral import WavenumberContext, build_grid, moment_weights

DEFAULT_NU = 1e-3  # viscosity used by operator checks when the config gives none
DOUBLING_CHANGE = 0.10  # allowed relative change of sampled suprema under grid doubling
DOUBLING_RATIOS = ("nav_L2", "nav_H1", "nav_Hminus1", "imbalance", "coef_L2", "coef_H1", "coef_Hminus1")
EVANS_LAYER_MIN = 20.0  # Evans checks apply where min(L_+, L_-) reaches this


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float | None
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        tol = "" if self.tolerance is None else f" (tolerance {self.tolerance:.3g})"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{mark}] {self.name}: {self.value:.6g}{tol}{extra}"


@dataclass
class Outcome:
    checks: list
    files: list


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so sample streams are reproducible from the seed alone."""
    return np.random.Generator(np.random.Philox(seed))


def initial_vorticity(grid, k: int, name: str) -> np.ndarray:
    y = grid.y
    bump = np.exp(-3.0 * (y - 0.2) ** 2)
    base = (1.0 - y**2) * bump if name == "bump" else (1.0 - y**2) ** 2 * bump
    return project_moments(grid, k, base)


def static_shear(grid, spec: str):
    """ShearProfile of the initial shear (t = 0)."""
    return heat_extend(parse_shear_spec(grid, spec), DEFAULT_NU, 0.0)


def _dt(cfg: RunConfig, nu: float, k: float) -> float:
    m = cfg.evolution.steps_per_interval
    return nu ** (-1.0 / 3.0) / m if m else default_dt(nu, k)


# ---------------------------------------------------------------- operator-check


def operator_check(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    coarse = build_grid(max(cfg.grid_n // 2, 16))
    nu = cfg.nu[0] if cfg.nu else DEFAULT_NU
    shear = static_shear(grid, cfg.shear)
    tol = cfg.tolerances
    rows, checks = [], []
    for k in cfg.k:
        rng = make_rng(cfg.seed + 7919 * k)
        kern = build_ghost(WavenumberContext(k, nu), grid)
        worst = {"conjugation": 0.0, "antisymmetry": 0.0, "imaginary_part": 0.0}
        for _ in range(cfg.samples):
            f = smooth_random_field(grid, rng)
            g = smooth_random_field(grid, rng)
            d = pairing_defects(kern, f, g)
            for key in worst:
                worst[key] = max(worst[key], getattr(d, key))
        for key, v in worst.items():
            checks.append(Check(f"k={k} pairing {key}", v <= tol["identity"], v, tol["identity"]))
            rows.append((k, f"pairing_{key}", v))
        f_c, f_f = 1.0 - coarse.y**2, 1.0 - grid.y**2
        r_c = commutator_check(build_ghost(WavenumberContext(k, nu), coarse), f_c)
        r_f = commutator_check(kern, f_f)
        ratio = r_c / r_f if r_f > 0 else math.inf
        checks.append(Check(
            f"k={k} commutator shrink n={coarse.n_points}->{grid.n_points}", ratio >= tol["commutator_ratio"], ratio,
            tol["commutator_ratio"], f"residuals {r_c:.3e} -> {r_f:.3e}",
        ))
        rows += [(k, "commutator_coarse", r_c), (k, "commutator_fine", r_f), (k, "commutator_ratio", ratio)]
        nj = operator_norm(grid, kern.jk_matrix)
        nh = operator_norm(grid, kern.hk_matrix) / k
        checks.append(Check(f"k={k} norm of J_k (reported)", bool(np.isfinite(nj)), nj, None))
        checks.append(Check(f"k={k} norm of h_k / k (reported)", bool(np.isfinite(nh)), nh, None))
        rows += [(k, "norm_jk", nj), (k, "norm_hk_over_k", nh)]
        q1_max, c_delta, c_nu = -math.inf, 0.0, 0.0
        for _ in range(20):
            w = smooth_random_field(grid, rng)
            p = transfer_probe(kern, shear, w, nu)
            q1_max = max(q1_max, (p.transport + k * k / 16.0 * p.grad_phi_sq) / grid.norm(w) ** 2)
            if p.grad_phi_sq > 0:
                c_delta = max(c_delta, abs(p.nonlocal_) / p.grad_phi_sq)
            if p.grad_w_sq > 0:
                c_nu = max(c_nu, p.viscous / (nu * p.grad_w_sq))
        checks.append(Check(f"k={k} transport pairing sign", q1_max <= 1e-8, q1_max, 1e-8,
                            f"fitted C_delta {c_delta:.3g}, C_nu {c_nu:.3g}"))
        rows += [(k, "transport_pairing_max", q1_max), (k, "fitted_c_delta", c_delta), (k, "fitted_c_nu", c_nu)]
    path = report.write_csv(out / "operator_probes.csv", ("k", "probe", "value"), rows)
    return Outcome(checks, [path])


# ---------------------------------------------------------------- resolvent-sweep


def _sweep_points(cfg: RunConfig, grid, shear, pool):
    lam = cfg.lambdas
    jobs = [
        (nu, k, z)
        for nu in cfg.nu
        for k in cfg.k
        for z in sweep_lambdas(nu, k, lam.n_real, lam.deltas, lam.real_range)
    ]
    return list(pool.map(lambda j: evaluate_point(grid, shear, *j), jobs))


def spot_check_indices(points, count: int) -> list[int]:
    ok = [i for i, p in enumerate(points) if p.status == "ok"]
    if not ok:
        return []
    pick = np.linspace(0, len(ok) - 1, min(count, len(ok))).round().astype(int)
    return [ok[i] for i in sorted(set(pick))]


def doubling_changes(points, refined) -> dict:
    """Relative change of the sampled supremum of each ratio, coarse vs refined."""
    out = {}
    for name in DOUBLING_RATIOS:
        a = [p.ratios[name] for p in points if p.status == "ok"]
        b = [p.ratios[name] for p in refined if p.status == "ok"]
        if a and b:
            sa, sb = max(a), max(b)
            out[name] = abs(sb - sa) / max(abs(sa), 1e-300)
    return out


def resolvent_sweep_run(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    shear = static_shear(grid, cfg.shear)
    tol = cfg.tolerances
    points = _sweep_points(cfg, grid, shear, pool)
    files = report.write_resolvent_csvs(out, points)
    for family in report.RESOLVENT_PROBES:
        files.append(report.plot_resolvent(out / f"resolvent_{family}.csv", out / f"resolvent_{family}.png"))
    ok = [p for p in points if p.status == "ok"]
    bad = [p for p in points if p.status != "ok"]
    checks = []
    gap = max((p.path_gap for p in ok), default=0.0)
    checks.append(Check("decomposition vs monolithic solve", gap <= tol["path_gap"] and bool(ok), gap, tol["path_gap"],
                        f"{len(ok)} points, {len(bad)} degenerate points excluded"))
    layered = [p for p in ok if p.layer_scale >= EVANS_LAYER_MIN]
    if layered:
        ratio = max(max(p.ratios["evans_ratio_minus"], p.ratios["evans_ratio_plus"]) for p in layered)
        margin = min(p.ratios["evans_margin"] for p in layered)
        checks.append(Check("Evans ratio |A_-+/A_--|", ratio <= tol["evans_ratio"], ratio, tol["evans_ratio"],
                            f"{len(layered)} points with min(L) >= {EVANS_LAYER_MIN:g}"))
        checks.append(Check("Evans margin |D|/|A_--A_++|", margin >= tol["evans_margin"], margin, tol["evans_margin"]))
    picks = spot_check_indices(points, cfg.lambdas.spot_checks)
    if picks:
        fine = build_grid(2 * cfg.grid_n)
        fine_shear = static_shear(fine, cfg.shear)
        coarse_pts = [points[i] for i in picks]
        fine_pts = list(pool.map(lambda p: evaluate_point(fine, fine_shear, p.nu, p.k, p.lam), coarse_pts))
        changes = doubling_changes(coarse_pts, fine_pts)
        rows = [(name, v) for name, v in changes.items()]
        files.append(report.write_csv(out / "resolvent_doubling.csv", ("ratio_name", "relative_change"), rows))
        worst = max(changes.values(), default=0.0)
        checks.append(Check(f"grid doubling n={cfg.grid_n}->{2 * cfg.grid_n}", worst < DOUBLING_CHANGE, worst,
                            DOUBLING_CHANGE, f"{len(picks)} spot points"))
    return Outcome(checks, files)


# ---------------------------------------------------------------- time evolution


def _evolve_one(cfg: RunConfig, grid, init, nu: float):
    k = cfg.k[0]
    ctx = WavenumberContext(k, nu)
    w0 = initial_vorticity(grid, k, cfg.evolution.init)
    T = cfg.evolution.horizon * nu ** (-1.0 / 3.0)
    traj, ledger = run_direct(w0, ShearModel(init, nu), T, ctx, grid, dt=_dt(cfg, nu, k), zeta=cfg.evolution.zeta)
    return traj, ledger


def _moment_drift(grid, k, omegas) -> float:
    mp, mm = moment_weights(grid, k, 1), moment_weights(grid, k, -1)
    scale = max(grid.norm(w) for w in omegas)
    return max(max(abs(mp @ w), abs(mm @ w)) for w in omegas) / scale


def evolve(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    init = parse_shear_spec(grid, cfg.shear)
    k = cfg.k[0]
    results = list(pool.map(lambda nu: _evolve_one(cfg, grid, init, nu), cfg.nu))
    files, checks = [], []
    for nu, (traj, ledger) in zip(cfg.nu, results):
        tag = f"nu{nu:.0e}_k{k}"
        csv_path = report.write_ledger_csv(out / f"ledger_{tag}.csv", ledger)
        files.append(csv_path)
        files += report.write_snapshots(out / f"omega_{tag}", traj.times, traj.omegas, grid_n=grid.n_points, k=k, nu=nu)
        files.append(report.plot_ledger(csv_path, out / f"ledger_{tag}.png", f"nu={nu:g}, k={k}"))
        drift = _moment_drift(grid, k, traj.omegas)
        finite = bool(np.all(np.isfinite(traj.omegas)))
        checks.append(Check(f"nu={nu:g} moment drift", finite and drift <= cfg.tolerances["moment_drift"], drift,
                            cfg.tolerances["moment_drift"]))
    return Outcome(checks, files)


def frozen_compare(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    init = parse_shear_spec(grid, cfg.shear)
    k = cfg.k[0]
    couette_like = cfg.shear.strip() == "couette"
    tol = cfg.tolerances["frozen_gap_couette" if couette_like else "frozen_gap"]

    def one(nu):
        ctx = WavenumberContext(k, nu)
        w0 = initial_vorticity(grid, k, cfg.evolution.init)
        T = cfg.evolution.horizon * nu ** (-1.0 / 3.0)
        dt = _dt(cfg, nu, k)
        model = ShearModel(init, nu)
        traj, _ = run_direct(w0, model, T, ctx, grid, dt=dt, zeta=cfg.evolution.zeta)
        sched, ledger = run_frozen(w0, model, T, ctx, grid, dt=dt, zeta=cfg.evolution.zeta)
        return traj, sched, ledger

    files, checks = [], []
    for nu, (traj, sched, ledger) in zip(cfg.nu, pool.map(one, cfg.nu)):
        tag = f"nu{nu:.0e}_k{k}"
        rec = sched.reconstructed
        gaps = [grid.norm(a - b) / max(grid.norm(b), 1e-300) for a, b in zip(rec, traj.omegas)]
        rows = [(t, grid.norm(b), grid.norm(a), g) for t, a, b, g in zip(traj.times, rec, traj.omegas, gaps)]
        csv_path = report.write_csv(out / f"frozen_{tag}.csv", ("t", "direct_l2", "frozen_l2", "relative_gap"), rows)
        comp_rows = [(j, ledger.x_functionals.get(j, math.nan), ledger.y_functionals.get(j, math.nan))
                     for j in range(sched.n_components())]
        files += [csv_path, report.write_csv(out / f"frozen_functionals_{tag}.csv", ("j", "X", "Y"), comp_rows)]
        files += report.write_snapshots(out / f"frozen_{tag}", traj.times, rec, grid_n=grid.n_points, k=k, nu=nu)
        files.append(report.plot_series(out / f"frozen_{tag}.png", traj.times,
                                        {"direct": [r[1] for r in rows], "frozen sum": [r[2] for r in rows],
                                         "relative gap": gaps}, title=f"nu={nu:g}, k={k}"))
        worst = max(gaps)
        checks.append(Check(f"nu={nu:g} frozen vs direct, worst over time", worst <= tol, worst, tol,
                            f"{sched.n_components()} components, total energy {ledger.total_energy:.4g}"))
    return Outcome(checks, files)


def homogeneous_split_run(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    init = parse_shear_spec(grid, cfg.shear)
    k = cfg.k[0]
    tol = cfg.tolerances

    def one(nu):
        ctx = WavenumberContext(k, nu)
        shear = heat_extend(init, nu, 0.0)
        w0 = initial_vorticity(grid, k, cfg.evolution.init)
        T = cfg.evolution.horizon * nu ** (-1.0 / 3.0)
        dt = _dt(cfg, nu, k)
        split = homogeneous_split(w0, shear, T, ctx, grid, dt=dt)
        traj, _ = run_direct(w0, shear, T, ctx, grid, dt=dt)
        return split, traj

    files, checks = [], []
    for nu, (split, traj) in zip(cfg.nu, pool.map(one, cfg.nu)):
        tag = f"nu{nu:.0e}_k{k}"
        total = split.total
        gaps = [grid.norm(a - b) / max(grid.norm(b), 1e-300) for a, b in zip(total, traj.omegas)]
        mom = np.abs(split.moments).max(axis=1)
        rows = [
            (t, grid.norm(a), grid.norm(b), grid.norm(c), g, m)
            for t, a, b, c, g, m in zip(split.times, split.passive, split.residual, split.boundary, gaps, mom)
        ]
        csv_path = report.write_csv(out / f"split_{tag}.csv",
                                    ("t", "passive_l2", "residual_l2", "boundary_l2", "relative_gap", "moments"), rows)
        files.append(csv_path)
        files.append(report.plot_series(out / f"split_{tag}.png", split.times,
                                        {"passive": [r[1] for r in rows], "residual": [r[2] for r in rows],
                                         "boundary": [r[3] for r in rows]}, title=f"nu={nu:g}, k={k}"))
        checks.append(Check(f"nu={nu:g} split closure at T", gaps[-1] <= tol["split_gap"], gaps[-1], tol["split_gap"]))
        checks.append(Check(f"nu={nu:g} summed moments", float(mom.max()) <= tol["split_moments"], float(mom.max()),
                            tol["split_moments"]))
    return Outcome(checks, files)


# ---------------------------------------------------------------- rates and thresholds


def loglog_fit(x, y):
    """Slope, intercept, slope standard error and residuals of log y on log x."""
    from scipy import stats

    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    fit = stats.linregress(lx, ly)
    return fit.slope, fit.intercept, fit.stderr, ly - (fit.slope * lx + fit.intercept)


def rate_fit(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    init = parse_shear_spec(grid, cfg.shear)
    k = cfg.k[0]
    tol = cfg.tolerances
    results = list(pool.map(lambda nu: _evolve_one(cfg, grid, init, nu), cfg.nu))
    rows, files = [], []
    for nu, (traj, ledger) in zip(cfg.nu, results):
        L = nu ** (-1.0 / 3.0)
        a, b = cfg.evolution.fit_window
        rate, r2 = fit_rate(ledger.times, ledger.omega_l2, (a * L, b * L))
        rows.append((nu, k, rate, rate / nu ** (1.0 / 3.0), r2))
        files.append(report.write_ledger_csv(out / f"ledger_nu{nu:.0e}_k{k}.csv", ledger))
    files.append(report.write_csv(out / "rates.csv", ("nu", "k", "rate", "rate_over_nu_third", "r2"), rows))
    nus, rates = [r[0] for r in rows], [r[2] for r in rows]
    slope, icept, err, res = loglog_fit(nus, rates)
    band = (slope - 2 * err, slope + 2 * err) if np.isfinite(err) else (math.nan, math.nan)
    files.append(report.write_csv(out / "rate_slope.csv", ("slope", "stderr", "band_low", "band_high"),
                                  [(slope, err, band[0], band[1])]))
    files.append(report.plot_loglog_fit(out / "rate_fit.png", nus, rates, slope, icept, "nu", "decay rate", 1.0 / 3.0))
    ok = tol["slope_min"] <= slope <= tol["slope_max"]
    return Outcome([Check("log-log slope of decay rate", ok, slope, None,
                          f"range [{tol['slope_min']:g}, {tol['slope_max']:g}], band [{band[0]:.3f}, {band[1]:.3f}]")],
                   files)


def dns_threshold(cfg: RunConfig, out: Path, pool) -> Outcome:
    grid = build_grid(cfg.grid_n)
    thr = cfg.threshold
    runs = threshold_sweep(grid, cfg.nu, cfg.amplitudes, thr.kappa, thr.horizon_factor, thr.growth_factor,
                           thr.kmax, pool=pool)
    csv_path = report.write_threshold_csv(out / "threshold.csv", runs)
    files = [csv_path, report.plot_threshold(csv_path, out / "threshold.png")]
    fit = stability_boundary(runs)
    rows = [(nu, a, fit.flips[nu]) for nu, a in zip(fit.nus, fit.amplitudes)]
    files.append(report.write_csv(out / "threshold_boundary.csv", ("nu", "amplitude_star", "verdict_changes"), rows))
    files.append(report.write_csv(out / "threshold_slope.csv", ("slope", "reference", "residuals"),
                                  [(fit.slope, 0.5, " ".join(report.fmt(r) for r in fit.residuals))]))
    classified = all(r.verdict in ("bounded", "grew") for r in runs)
    checks = [
        Check("every sweep point classified", classified and len(runs) == len(cfg.nu) * len(cfg.amplitudes),
              float(len(runs)), None),
        Check("boundary slope (reported, reference 0.5)", True, fit.slope, None,
              "residuals " + " ".join(f"{r:.3g}" for r in fit.residuals)),
    ]
    return Outcome(checks, files)


EXPERIMENTS = {
    "operator-check": operator_check,
    "resolvent-sweep": resolvent_sweep_run,
    "evolve": evolve,
    "frozen-compare": frozen_compare,
    "homogeneous-split": homogeneous_split_run,
    "dns-threshold": dns_threshold,
    "rate-fit": rate_fit,
}
