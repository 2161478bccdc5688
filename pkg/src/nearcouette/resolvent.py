"""Resolvent problem for a time-frozen shear.

For a wavenumber k, viscosity nu and spectral parameter lambda the vorticity
w and stream function phi = Delta_k^{-1} w solve

    -nu Delta_k w + ik (U - lambda) w - ik U'' phi = F

with either the Navier condition w(+-1) = 0 or the no-slip condition
int exp(+-ky) w dy = 0.  The no-slip solution is built as the Navier solution
plus two boundary correctors whose leading part is an Airy function; a
monolithic solve of the no-slip problem serves as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
import scipy.linalg as sla

from .airy import airy_ai, airy_log_magnitude, airy_ray_integral
from .errors import EvansDegenerate, IllConditioned, NearCouetteError
from .shear import ShearProfile
from .spectral import (
    LAPACK_LOCK,
    lu_solve,
    SpectralGrid,
    WavenumberContext,
    grad_k_norm,
    h_minus1_norm,
    helmholtz_inverse,
    helmholtz_inverse_matrix,
    moment_weights,
    rho_weight,
)

CONDITION_LIMIT = 1e12
EVANS_FLOOR = 1e-14
FORCING_CLASSES = ("L2", "H1_0", "Hminus1")


class PathDisagreement(NearCouetteError):
    """The corrector decomposition and the monolithic solve differ."""


@dataclass(frozen=True, eq=False)
class ResolventProblem:
    ctx: WavenumberContext
    grid: SpectralGrid
    shear: ShearProfile
    lam: complex
    forcing: np.ndarray
    forcing_class: str = "L2"
    # (f1, f2, f3) with F = ik f1 + f2' + f3, only for the H^{-1} class
    triple: tuple | None = None

    def __post_init__(self):
        if self.forcing_class not in FORCING_CLASSES:
            raise ValueError(f"forcing_class must be one of {FORCING_CLASSES}")
        if np.shape(self.forcing) != self.grid.y.shape:
            raise ValueError("forcing does not live on the grid")
        if self.shear.u.shape != self.grid.y.shape:
            raise ValueError("shear profile does not live on the grid")
        if not np.all(np.isfinite(self.forcing)):
            raise ValueError("forcing must be finite")
        if self.forcing_class == "H1_0":
            scale = max(float(np.abs(self.forcing).max()), 1e-300)
            if max(abs(self.forcing[0]), abs(self.forcing[-1])) > 1e-12 * scale:
                raise ValueError("H1_0 forcing must vanish at both walls")

    @classmethod
    def from_triple(cls, ctx, grid, shear, lam, f1, f2, f3) -> "ResolventProblem":
        """Forcing ik f1 + d/dy f2 + f3."""
        F = 1j * ctx.k * np.asarray(f1) + grid.D @ np.asarray(f2) + np.asarray(f3)
        return cls(ctx, grid, shear, complex(lam), F, "Hminus1", (f1, f2, f3))

    @property
    def k(self) -> float:
        return self.ctx.k

    @property
    def nu(self) -> float:
        return self.ctx.nu


# ---------------------------------------------------------------- operators


def navier_operator(problem: ResolventProblem) -> np.ndarray:
    """-nu Delta_k + ik (U - lambda) - ik U'' Delta_k^{-1}, all rows."""
    grid, k, nu = problem.grid, problem.k, problem.nu
    n = grid.n_points
    H = helmholtz_inverse_matrix(grid, k)
    A = -nu * (grid.D2 - k * k * np.eye(n)) + np.diag(1j * k * (problem.shear.u - problem.lam))
    A = A - 1j * k * problem.shear.d2u[:, None] * H
    return A


@dataclass(frozen=True, eq=False)
class _Factor:
    lu: tuple
    rcond: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, b)


def _factor(A: np.ndarray, what: str) -> _Factor:
    # equilibrate rows so the condition estimate ignores row scaling
    A = A / np.abs(A).max(axis=1, keepdims=True)
    lu = sla.lu_factor(A, check_finite=False)
    anorm = float(np.abs(A).sum(axis=0).max())
    with LAPACK_LOCK:
        rcond, info = sla.lapack.zgecon(lu[0], anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond * CONDITION_LIMIT < 1.0:
        cond = 1.0 / rcond if rcond > 0 else math.inf
        raise IllConditioned(f"{what}: condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}", condition=cond)
    return _Factor(lu, float(rcond))


def _row_scaled(A: np.ndarray, b: np.ndarray):
    s = np.abs(A).max(axis=1)
    return b / s


def _navier_factor(problem: ResolventProblem):
    """Factorized Navier system (Dirichlet rows at the walls) and its raw matrix."""
    A = navier_operator(problem)
    A[0] = 0.0
    A[-1] = 0.0
    A[0, 0] = A[-1, -1] = 1.0
    return A, _factor(A, "Navier system")


def _solve_dirichlet(A: np.ndarray, fac: _Factor, rhs: np.ndarray) -> np.ndarray:
    b = np.array(rhs, dtype=complex)
    b[0] = 0.0
    b[-1] = 0.0
    return fac.solve(_row_scaled(A, b))


# ---------------------------------------------------------------- Navier part


def e_functional(grid: SpectralGrid, ctx: WavenumberContext, w: np.ndarray, phi: np.ndarray) -> float:
    """nu^(1/6)|k|^(4/3)||grad_k phi|| + nu^(2/3)|k|^(1/3)||grad_k w|| + nu^(1/3)|k|^(2/3)||w||."""
    k, nu = abs(ctx.k), ctx.nu
    return float(
        nu ** (1 / 6) * k ** (4 / 3) * grad_k_norm(grid, phi, k)
        + nu ** (2 / 3) * k ** (1 / 3) * grad_k_norm(grid, w, k)
        + nu ** (1 / 3) * k ** (2 / 3) * grid.norm(w)
    )


@dataclass(frozen=True, eq=False)
class NavierSolution:
    w_na: np.ndarray
    phi_na: np.ndarray
    e_functional: float
    imbalance: float
    residual: float
    rcond: float


def _imbalance(problem, w, phi) -> float:
    sh = problem.shear
    return problem.grid.norm((sh.u - problem.lam) * w - sh.d2u * phi)


def _interior_norm(grid: SpectralGrid, f: np.ndarray) -> float:
    return float(np.sqrt(grid.w[1:-1] @ np.abs(f[1:-1]) ** 2))


def _navier_solution(problem: ResolventProblem, w: np.ndarray, fac: _Factor) -> NavierSolution:
    grid = problem.grid
    phi = helmholtz_inverse(grid, problem.k, w)
    res = _interior_norm(grid, navier_operator(problem) @ w - problem.forcing)
    return NavierSolution(w, phi, e_functional(grid, problem.ctx, w, phi), _imbalance(problem, w, phi), res, fac.rcond)


def solve_navier(problem: ResolventProblem) -> NavierSolution:
    """Navier solution w_Na with w_Na(+-1) = 0."""
    A, fac = _navier_factor(problem)
    F = np.asarray(problem.forcing, dtype=complex)
    return _navier_solution(problem, _solve_dirichlet(A, fac, F), fac)


def imbalance_probe(problem: ResolventProblem, nav: NavierSolution | None = None) -> float:
    """||(U - lambda) w_Na - U'' phi_Na|| / ||F||."""
    nF = problem.grid.norm(problem.forcing)
    if nF == 0.0:
        return 0.0
    nav = nav or solve_navier(problem)
    return nav.imbalance / nF


def forcing_norms(problem: ResolventProblem) -> dict:
    grid, k = problem.grid, problem.k
    F = np.asarray(problem.forcing, dtype=complex)
    return {
        "L2": grid.norm(F),
        "H1": grad_k_norm(grid, F, k),
        "Hminus1": h_minus1_norm(grid, F, k),
    }


def high_freq_probe(problem: ResolventProblem, nav: NavierSolution | None = None) -> tuple[float, float, float]:
    """nu k^2 ||w||/||F||, nu k^2 ||u||/||F||_{H^-1}, nu |k| ||w||/||F||_{H^-1}."""
    k, nu = abs(problem.k), problem.nu
    if nu * k * k < float(np.abs(problem.shear.du).max()):
        raise ValueError("high-frequency probe needs nu k^2 >= max |U'|")
    norms = forcing_norms(problem)
    if norms["L2"] == 0.0:
        return 0.0, 0.0, 0.0
    nav = nav or solve_navier(problem)
    grid = problem.grid
    nw = grid.norm(nav.w_na)
    nu_vel = grad_k_norm(grid, nav.phi_na, k)
    return (nu * k * k * nw / norms["L2"], nu * k * k * nu_vel / norms["Hminus1"], nu * k * nw / norms["Hminus1"])


# ---------------------------------------------------------------- correctors


@dataclass(frozen=True)
class EvansCoefficients:
    a_mm: complex
    a_mp: complex
    a_pm: complex
    a_pp: complex
    evans: complex
    # rows: w_+ = c[0,0] W_- + c[0,1] W_+, w_- = c[1,0] W_- + c[1,1] W_+
    combination: np.ndarray = field(repr=False)

    @property
    def ratio_minus(self) -> float:
        """|A_{-+} / A_{--}|."""
        return abs(self.a_mp / self.a_mm)

    @property
    def ratio_plus(self) -> float:
        """|A_{+-} / A_{++}|."""
        return abs(self.a_pm / self.a_pp)

    @property
    def evans_margin(self) -> float:
        """|D| / |A_{--} A_{++}|."""
        return abs(self.evans) / abs(self.a_mm * self.a_pp)


@dataclass(frozen=True, eq=False)
class CorrectorPair:
    """Boundary correctors at y = +1 (plus) and y = -1 (minus).

    Airy parts are stored multiplied by exp(log_scale_*) so that values near
    the wall are O(1); every derived quantity is invariant under this scaling.
    """

    L_plus: float
    L_minus: float
    d_plus: complex
    d_minus: complex
    log_scale_plus: float
    log_scale_minus: float
    w_ap_plus: np.ndarray
    w_ap_minus: np.ndarray
    a0_plus: complex
    a0_minus: complex
    ode_residual_plus: float
    ode_residual_minus: float
    w_re_plus: np.ndarray | None = None
    w_re_minus: np.ndarray | None = None
    # correction that makes the discrete residual of the Airy equation vanish
    w_fix_plus: np.ndarray | None = None
    w_fix_minus: np.ndarray | None = None
    coeffs: EvansCoefficients | None = None
    w_plus: np.ndarray | None = None
    w_minus: np.ndarray | None = None

    @property
    def full_plus(self) -> np.ndarray:
        return self.w_ap_plus + self.w_re_plus + self.w_fix_plus

    @property
    def full_minus(self) -> np.ndarray:
        return self.w_ap_minus + self.w_re_minus + self.w_fix_minus


_THETA = {1: 5.0 * np.pi / 6.0, -1: np.pi / 6.0}


def corrector_scales(problem: ResolventProblem, sign: int) -> tuple[float, complex]:
    """(L, d) for the wall at y = sign."""
    U, dU = problem.shear.at_wall(sign)
    if not dU > 0:
        raise ValueError("boundary correctors need U'(+-1) > 0")
    k, nu = problem.k, problem.nu
    L = (dU * k / nu) ** (1.0 / 3.0)
    d = (U - sign * dU - problem.lam - 1j * nu * k) / dU
    return float(L), complex(d)


def _airy_argument(y, L, d, sign):
    return L * (np.asarray(y) + d) * np.exp(1j * _THETA[sign])


def linearized_shear(problem: ResolventProblem, sign: int) -> np.ndarray:
    U, dU = problem.shear.at_wall(sign)
    return U + dU * (problem.grid.y - sign)


def airy_ode_residual(problem: ResolventProblem, W: np.ndarray, sign: int) -> np.ndarray:
    """-nu W'' + nu k^2 W + ik (U_lin - lambda) W at all nodes."""
    grid, k, nu = problem.grid, problem.k, problem.nu
    lin = linearized_shear(problem, sign)
    return -nu * (grid.D2 @ W) + nu * k * k * W + 1j * k * (lin - problem.lam) * W


def airy_correctors(problem: ResolventProblem) -> CorrectorPair:
    """Airy approximate correctors W_{+-;ap} and the wall values of A_0."""
    if problem.k <= 0:
        raise ValueError("correctors are built for k > 0; use conjugate symmetry for k < 0")
    y = problem.grid.y
    out = {}
    for sign in (1, -1):
        L, d = corrector_scales(problem, sign)
        z = _airy_argument(y, L, d, sign)
        zwall = _airy_argument(float(sign), L, d, sign)
        scale = -airy_log_magnitude(complex(zwall))
        W = airy_ai(z, scale)
        if sign < 0:
            a0_arg = L * (d - 1.0)
        else:
            a0_arg = -L * (np.conj(d) + 1.0)
        a0 = airy_ray_integral(complex(a0_arg), log_scale=scale)
        res = airy_ode_residual(problem, W, sign)
        nW = problem.grid.norm(W)
        rel = _interior_norm(problem.grid, res) / nW if nW > 0 else 0.0
        out[sign] = (L, d, scale, W, a0, rel)
    p, m = out[1], out[-1]
    return CorrectorPair(
        L_plus=p[0], L_minus=m[0], d_plus=p[1], d_minus=m[1],
        log_scale_plus=p[2], log_scale_minus=m[2],
        w_ap_plus=p[3], w_ap_minus=m[3], a0_plus=p[4], a0_minus=m[4],
        ode_residual_plus=p[5], ode_residual_minus=m[5],
    )


def corrector_remainder(problem: ResolventProblem, pair: CorrectorPair, _factored=None) -> CorrectorPair:
    """Remainders W_{+-;re} with zero wall values.

    The model remainder solves the Navier system with right-hand side
    ik U'' Phi_ap - ik (U - U_lin) W_ap.  A second Dirichlet solve removes the
    discrete residual of the Airy equation, so W_+- solve the discrete
    homogeneous equation exactly at interior nodes.
    """
    A, fac = _factored or _navier_factor(problem)
    grid, k = problem.grid, problem.k
    parts = {}
    for sign, W in ((1, pair.w_ap_plus), (-1, pair.w_ap_minus)):
        Phi = helmholtz_inverse(grid, k, W)
        lin = linearized_shear(problem, sign)
        rhs = 1j * k * problem.shear.d2u * Phi - 1j * k * (problem.shear.u - lin) * W
        w_re = _solve_dirichlet(A, fac, rhs)
        w_fix = _solve_dirichlet(A, fac, -airy_ode_residual(problem, W, sign))
        parts[sign] = (w_re, w_fix)
    return replace(
        pair,
        w_re_plus=parts[1][0], w_re_minus=parts[-1][0],
        w_fix_plus=parts[1][1], w_fix_minus=parts[-1][1],
    )


def _sinh_weights(grid: SpectralGrid, k: float, sign: int) -> np.ndarray:
    """Quadrature weights of int f sinh(k(y + sign)) / sinh(2k) dy."""
    y = grid.y
    return grid.w * np.sinh(k * (y + sign)) / np.sinh(2.0 * k)


def wall_slope(grid: SpectralGrid, k: float, w: np.ndarray, sign: int) -> complex:
    """d/dy Delta_k^{-1} w at y = sign, from the exact Green's-function identity."""
    return complex(_sinh_weights(grid, k, sign) @ w)


def evans_assembly(problem: ResolventProblem, pair: CorrectorPair, check_tol: float = 1e-6) -> CorrectorPair:
    """Pairings A_{s,+-}, Evans function D and the unit correctors w_+-."""
    if pair.w_re_plus is None:
        raise ValueError("complete the correctors with corrector_remainder first")
    grid, k = problem.grid, problem.k
    Wp, Wm = pair.full_plus, pair.full_minus
    wp_, wm_ = _sinh_weights(grid, k, 1), _sinh_weights(grid, k, -1)
    a_mm, a_mp = complex(wm_ @ Wm), complex(wp_ @ Wm)
    a_pm, a_pp = complex(wm_ @ Wp), complex(wp_ @ Wp)
    evans = a_mm * a_pp - a_pm * a_mp
    if not abs(evans) >= EVANS_FLOOR * abs(a_mm * a_pp):
        raise EvansDegenerate(f"|D| = {abs(evans):.3e} is below {EVANS_FLOOR:g} |A_-- A_++|")
    C = np.array([[-a_pm, a_mm], [a_pp, -a_mp]]) / evans
    w_plus = C[0, 0] * Wm + C[0, 1] * Wp
    w_minus = C[1, 0] * Wm + C[1, 1] * Wp
    # unit boundary data: slope 1 at the owned wall, 0 at the other one
    for w, own in ((w_plus, 1), (w_minus, -1)):
        s_own = wall_slope(grid, k, w, own)
        s_other = wall_slope(grid, k, w, -own)
        if abs(s_own - 1.0) > check_tol or abs(s_other) > check_tol:
            raise EvansDegenerate("unit corrector boundary conditions not met; the 2x2 system is too ill-conditioned")
    coeffs = EvansCoefficients(a_mm, a_mp, a_pm, a_pp, evans, C)
    return replace(pair, coeffs=coeffs, w_plus=w_plus, w_minus=w_minus)


def build_correctors(problem: ResolventProblem, _factored=None) -> CorrectorPair:
    pair = airy_correctors(problem)
    pair = corrector_remainder(problem, pair, _factored)
    return evans_assembly(problem, pair)


def decay_envelope_constant(problem: ResolventProblem, pair: CorrectorPair, c: float = 0.1) -> float:
    """max_y |W_{-;ap}(y) / A_0(L_-(d_- - 1))| / envelope(y) over the running majorant.

    envelope(y) = (1 + |z|)^(1/2) exp(-c L_- (y + 1) (1 + |z|)^(1/2)) with
    z = L_-(d_- - 1).  The running maximum taken from the far wall toward
    y is compared, so a bounded result means the ratio is dominated by a
    monotone exponential profile.
    """
    y = problem.grid.y
    z = pair.L_minus * (pair.d_minus - 1.0)
    r = np.abs(pair.w_ap_minus / pair.a0_minus)
    # nodes run from +1 to -1, so a cumulative max from the start is the majorant toward -1
    major = np.maximum.accumulate(r)
    s = math.sqrt(1.0 + abs(z))
    env = s * np.exp(-c * pair.L_minus * (y + 1.0) * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(env > 0, major / env, np.where(major > 0, np.inf, 0.0))
    return float(q.max())


# ---------------------------------------------------------------- no-slip


@dataclass(frozen=True, eq=False)
class NoSlipSolution:
    w: np.ndarray
    phi: np.ndarray
    c_plus: complex
    c_minus: complex
    w_direct: np.ndarray | None = None
    path_gap: float = 0.0
    navier: NavierSolution | None = None
    pair: CorrectorPair | None = None


def solve_noslip_direct(problem: ResolventProblem) -> np.ndarray:
    """Monolithic no-slip solve: wall rows replaced by the two moment conditions."""
    A = navier_operator(problem)
    A[0] = moment_weights(problem.grid, problem.k, 1)
    A[-1] = moment_weights(problem.grid, problem.k, -1)
    fac = _factor(A, "no-slip system")
    b = np.array(problem.forcing, dtype=complex)
    b[0] = 0.0
    b[-1] = 0.0
    return fac.solve(_row_scaled(A, b))


def assemble_noslip(problem: ResolventProblem, path: str = "both", tol: float = 1e-6, strict: bool = True) -> NoSlipSolution:
    """w = w_Na + c_+ w_+ + c_- w_- with c_+- = -phi_Na'(+-1).

    ``path`` is "decomposition", "direct" or "both"; with "both" the relative
    gap between the two is stored and, if ``strict``, must not exceed ``tol``.
    """
    if path not in ("decomposition", "direct", "both"):
        raise ValueError("path must be 'decomposition', 'direct' or 'both'")
    grid, k = problem.grid, problem.k
    if path == "direct":
        w = solve_noslip_direct(problem)
        return NoSlipSolution(w, helmholtz_inverse(grid, k, w), 0j, 0j, w_direct=w)
    A, fac = _navier_factor(problem)
    F = np.asarray(problem.forcing, dtype=complex)
    nav = _navier_solution(problem, _solve_dirichlet(A, fac, F), fac)
    w_na = nav.w_na
    pair = build_correctors(problem, (A, fac))
    c_plus = -wall_slope(grid, k, w_na, 1)
    c_minus = -wall_slope(grid, k, w_na, -1)
    w = w_na + c_plus * pair.w_plus + c_minus * pair.w_minus
    phi = helmholtz_inverse(grid, k, w)
    w_direct, gap = None, 0.0
    if path == "both":
        w_direct = solve_noslip_direct(problem)
        scale = max(grid.norm(w_direct), grid.norm(w))
        gap = grid.norm(w - w_direct) / scale if scale > 0 else 0.0
        if strict and gap > tol:
            raise PathDisagreement(f"decomposition and direct no-slip solves differ by {gap:.3e}")
    return NoSlipSolution(w, phi, c_plus, c_minus, w_direct, gap, nav, pair)


# ---------------------------------------------------------------- probes


def estimate_ratios(problem: ResolventProblem, sol: NoSlipSolution) -> dict:
    """Ratios whose boundedness expresses the resolvent estimates."""
    grid, ctx = problem.grid, problem.ctx
    k, nu = abs(ctx.k), ctx.nu
    lam = problem.lam
    nav, pair = sol.navier, sol.pair
    norms = forcing_norms(problem)
    w = nav.w_na
    lap_w = grid.D2 @ w - k * k * w
    damp = math.sqrt(k * max(lam.imag, 0.0)) * grid.norm(w)
    left = nav.e_functional + damp
    L = ctx.L
    U_top, _ = problem.shear.at_wall(1)
    U_bot, _ = problem.shear.at_wall(-1)
    gp = 1.0 + k * abs(lam.real - U_top)
    gm = 1.0 + k * abs(lam.real - U_bot)
    cp, cm = abs(sol.c_plus), abs(sol.c_minus)
    logL = math.log(L)
    out = {
        "nav_L2": (left + nu * grid.norm(lap_w)) / norms["L2"],
        "nav_H1": (left + nu * grid.norm(lap_w)) / (nu ** (1 / 6) * k ** (-2 / 3) * norms["H1"]),
        "nav_Hminus1": left / (nu ** (-1 / 3) * k ** (1 / 3) * norms["Hminus1"]),
        "imbalance": nav.imbalance / norms["L2"],
        "coef_L2": (gp * cp + gm * cm) / (nu ** (-1 / 6) * k ** (-5 / 6) * norms["L2"] * logL),
        "coef_H1": (gp * cp + gm * cm) / (k ** (-1 / 2) * norms["H1"] * logL),
        "coef_Hminus1": (gp**0.75 * cp + gm**0.75 * cm) / (nu ** (-1 / 2) * k ** (-1 / 2) * norms["Hminus1"] * logL),
    }
    out.update(corrector_ratios(problem, pair))
    return out


def corrector_ratios(problem: ResolventProblem, pair: CorrectorPair) -> dict:
    grid, ctx = problem.grid, problem.ctx
    k, nu, lam = abs(ctx.k), ctx.nu, problem.lam
    L = ctx.L
    rho = rho_weight(grid, L)
    out = {}
    for name, w, sign in (("plus", pair.w_plus, 1), ("minus", pair.w_minus, -1)):
        U, _ = problem.shear.at_wall(sign)
        g = 1.0 + k * abs(lam - U)
        out[f"corrector_sup_{name}"] = math.sqrt(nu) * float(np.abs(w).max()) / math.sqrt(g)
        out[f"corrector_L1_{name}"] = float(grid.w @ np.abs(w))
        out[f"corrector_rho_{name}"] = grid.norm(np.sqrt(rho) * w) / math.sqrt(L)
    c = pair.coeffs
    out["evans_ratio_minus"] = c.ratio_minus
    out["evans_ratio_plus"] = c.ratio_plus
    out["evans_margin"] = c.evans_margin
    return out


def default_forcing(grid: SpectralGrid) -> np.ndarray:
    """Smooth complex forcing vanishing at both walls."""
    y = grid.y
    return (1.0 - y**2) * (1.0 + 0.5 * y + 0.25j * y**2)


def sweep_lambdas(nu: float, k: float, n_real: int = 81, deltas=(0.0, 0.1), lr_range=(-2.0, 2.0)) -> list[complex]:
    """lambda_r uniform in lr_range, lambda_i = -delta nu^(1/3) |k|^(-1/3)."""
    lrs = np.linspace(lr_range[0], lr_range[1], n_real)
    return [complex(lr, -d * nu ** (1 / 3) * abs(k) ** (-1 / 3)) for d in deltas for lr in lrs]


@dataclass(frozen=True)
class SweepPoint:
    nu: float
    k: float
    lam: complex
    grid_n: int
    status: str  # "ok", "ill-conditioned", "evans-degenerate"
    path_gap: float
    ratios: dict
    message: str = ""
    layer_scale: float = math.nan  # min(L_+, L_-)


def evaluate_point(grid: SpectralGrid, shear: ShearProfile, nu: float, k: float, lam: complex, forcing=None) -> SweepPoint:
    """One resolvent sweep point; degenerate parameters are reported, not raised."""
    F = default_forcing(grid) if forcing is None else forcing
    problem = ResolventProblem(WavenumberContext(k, nu), grid, shear, complex(lam), F, "H1_0")
    try:
        sol = assemble_noslip(problem, strict=False)
    except IllConditioned as exc:
        return SweepPoint(nu, k, complex(lam), grid.n_points, "ill-conditioned", math.nan, {}, str(exc))
    except EvansDegenerate as exc:
        return SweepPoint(nu, k, complex(lam), grid.n_points, "evans-degenerate", math.nan, {}, str(exc))
    return SweepPoint(
        nu, k, complex(lam), grid.n_points, "ok", sol.path_gap, estimate_ratios(problem, sol),
        layer_scale=min(sol.pair.L_plus, sol.pair.L_minus),
    )


def resolvent_sweep(grid, shear, nus, ks, lambdas_for=None, forcing=None, pool=None) -> list[SweepPoint]:
    """Evaluate all (nu, k, lambda) points in a fixed order.

    ``lambdas_for(nu, k)`` returns the lambda list (default :func:`sweep_lambdas`);
    ``pool`` is an optional executor whose ``map`` keeps input order.
    """
    lambdas_for = lambdas_for or (lambda nu, k: sweep_lambdas(nu, k))
    jobs = [(nu, k, lam) for nu in nus for k in ks for lam in lambdas_for(nu, k)]

    def run(job):
        return evaluate_point(grid, shear, job[0], job[1], job[2], forcing)

    mapper = pool.map if pool is not None else map
    return list(mapper(run, jobs))
