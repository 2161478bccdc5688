"""Time stepping of one Fourier mode of the linearized vorticity equation.

    d/dt w + ik U w - ik U'' psi - nu Delta_k w = F,   Delta_k psi = w,
    psi(+-1) = 0,   int exp(+-ky) w dy = 0.

Diffusion and the two moment conditions are implicit; transport, the
nonlocal term and forcing are explicit (second-order backward
differentiation with linear extrapolation).  The moment conditions replace
the two wall rows of the implicit matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateFit, StepRejected
from .shear import InitialShear, ShearModel, ShearProfile, frozen_time
from .spectral import (
    lu_solve,
    SpectralGrid,
    WavenumberContext,
    grad_k_norm,
    helmholtz_inverse,
    moment_weights,
    rho_weight,
)

MOMENT_REJECT = 1e-6


@dataclass(frozen=True, eq=False)
class ModeState:
    ctx: WavenumberContext
    grid: SpectralGrid
    t: float
    omega: np.ndarray
    psi: np.ndarray

    def moments(self) -> tuple[complex, complex]:
        k = self.ctx.k
        return (
            complex(moment_weights(self.grid, k, 1) @ self.omega),
            complex(moment_weights(self.grid, k, -1) @ self.omega),
        )


def mode_state(ctx: WavenumberContext, grid: SpectralGrid, omega, t: float = 0.0) -> ModeState:
    omega = np.asarray(omega, dtype=complex)
    if omega.shape != grid.y.shape:
        raise ValueError("omega does not live on the grid")
    return ModeState(ctx, grid, float(t), omega, helmholtz_inverse(grid, ctx.k, omega))


def project_moments(grid: SpectralGrid, k: float, f: np.ndarray) -> np.ndarray:
    """Subtract the least-squares combination of exp(+-ky) that zeroes both moments."""
    f = np.asarray(f, dtype=complex)
    basis = np.stack([np.exp(k * grid.y), np.exp(-k * grid.y)], axis=1)
    M = np.stack([moment_weights(grid, k, 1), moment_weights(grid, k, -1)])
    coef = np.linalg.solve(M @ basis, M @ f)
    return f - basis @ coef


def default_dt(nu: float, k: float, umax: float = 1.0) -> float:
    """An integer fraction of nu^(-1/3) resolving the interval and the transport.

    The explicit extrapolation is only weakly stable for imaginary
    eigenvalues, so |k| max|U| dt is kept at or below 0.1.
    """
    interval = nu ** (-1.0 / 3.0)
    m = max(math.ceil(50 * max(1.0, abs(k))), math.ceil(interval * abs(k) * umax / 0.1))
    return interval / m


class LinearStepper:
    """Factorized implicit matrices for one (k, nu, dt) and the explicit operator."""

    def __init__(self, ctx: WavenumberContext, grid: SpectralGrid, dt: float, transport: bool = True):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.ctx, self.grid, self.dt, self.transport = ctx, grid, float(dt), transport
        k, nu, n = ctx.k, ctx.nu, grid.n_points
        lap = grid.D2 - k * k * np.eye(n)
        self.m_plus = moment_weights(grid, k, 1)
        self.m_minus = moment_weights(grid, k, -1)
        self._lu = {}
        for order, c in ((1, 1.0), (2, 1.5)):
            A = (c / dt) * np.eye(n) - nu * lap
            A = A.astype(complex)
            A[0] = self.m_plus
            A[-1] = self.m_minus
            scale = np.abs(A).max(axis=1)
            self._lu[order] = (sla.lu_factor(A / scale[:, None]), scale)

    def explicit(self, shear: ShearProfile, omega: np.ndarray, psi: np.ndarray) -> np.ndarray:
        if not self.transport:
            return np.zeros_like(omega)
        k = self.ctx.k
        return -1j * k * shear.u * omega + 1j * k * shear.d2u * psi

    def solve(self, omega_n, N_n, omega_prev=None, N_prev=None, targets=(0.0, 0.0)) -> np.ndarray:
        """One step; first order when no history is given."""
        dt = self.dt
        if omega_prev is None:
            lu, scale = self._lu[1]
            rhs = omega_n / dt + N_n
        else:
            lu, scale = self._lu[2]
            rhs = (2.0 * omega_n - 0.5 * omega_prev) / dt + 2.0 * N_n - N_prev
        rhs = np.array(rhs, dtype=complex)
        rhs[0], rhs[-1] = targets
        out = lu_solve(lu, rhs / scale)
        drift = max(abs(self.m_plus @ out - targets[0]), abs(self.m_minus @ out - targets[1]))
        size = max(self.grid.norm(out), 1e-300)
        if not np.all(np.isfinite(out)) or drift > MOMENT_REJECT * size and drift > 1e-300:
            raise StepRejected(f"moment drift {drift:.3e} at t step {dt:g}; reduce dt")
        return out


@dataclass(frozen=True, eq=False)
class StepHistory:
    omega: np.ndarray
    explicit: np.ndarray


def step_linearized(state: ModeState, shear: ShearProfile, dt: float, forcing=None, history: StepHistory | None = None,
                    targets=(0.0, 0.0), stepper: LinearStepper | None = None, transport: bool = True):
    """Advance one step; returns the new state and the history for the next step.

    ``forcing`` is an array (vorticity forcing at the current time) or None.
    ``history`` carries the previous state and explicit term; without it the
    step is first order.
    """
    stepper = stepper or LinearStepper(state.ctx, state.grid, dt, transport)
    N = stepper.explicit(shear, state.omega, state.psi)
    if forcing is not None:
        N = N + forcing
    if history is None:
        new = stepper.solve(state.omega, N, targets=targets)
    else:
        new = stepper.solve(state.omega, N, history.omega, history.explicit, targets)
    return mode_state(state.ctx, state.grid, new, state.t + dt), StepHistory(state.omega, N)


# ---------------------------------------------------------------- diagnostics


def z_norm_sq(grid: SpectralGrid, ctx: WavenumberContext, omega: np.ndarray, psi: np.ndarray | None = None) -> float:
    """nu^(1/3)|k|^(2/3)||rho^(1/2) w||^2 + |k|^2 ||grad_k psi||^2 + nu^(1/2)|k| ||w||^2."""
    k, nu = abs(ctx.k), ctx.nu
    if psi is None:
        psi = helmholtz_inverse(grid, ctx.k, omega)
    rho = rho_weight(grid, ctx.L)
    return float(
        nu ** (1 / 3) * k ** (2 / 3) * grid.norm(np.sqrt(rho) * omega) ** 2
        + k * k * grad_k_norm(grid, psi, k) ** 2
        + math.sqrt(nu) * k * grid.norm(omega) ** 2
    )


def _trapezoid(t: np.ndarray, f: np.ndarray) -> float:
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))


@dataclass(eq=False)
class EnergyLedger:
    """Time series of the weighted norms of one mode."""

    ctx: WavenumberContext
    zeta: float = 0.01
    delta: float = 0.1
    delta_star: float = 0.04
    times: list = field(default_factory=list)
    omega_l2: list = field(default_factory=list)
    rho_weighted_l2: list = field(default_factory=list)
    z_norm_sq: list = field(default_factory=list)
    velocity_l2: list = field(default_factory=list)
    weighted_sup: list = field(default_factory=list)
    x_functionals: dict = field(default_factory=dict)
    y_functionals: dict = field(default_factory=dict)
    total_energy: float | None = None

    def record(self, grid: SpectralGrid, t: float, omega: np.ndarray, psi: np.ndarray):
        ctx = self.ctx
        k = abs(ctx.k)
        rho = rho_weight(grid, ctx.L)
        self.times.append(float(t))
        self.omega_l2.append(grid.norm(omega))
        self.rho_weighted_l2.append(grid.norm(np.sqrt(rho) * omega))
        self.z_norm_sq.append(z_norm_sq(grid, ctx, omega, psi))
        self.velocity_l2.append(grad_k_norm(grid, psi, k))
        self.weighted_sup.append(grid.norm(np.sqrt(1.0 - grid.y**2) * omega))

    def _weight(self, rate: float) -> np.ndarray:
        t = np.asarray(self.times)
        return np.exp(rate * self.ctx.nu ** (1 / 3) * t)

    def theorem_energy(self) -> np.ndarray:
        """Running E_k(T): sup-in-time weighted norm plus the two L^2-in-time terms."""
        if not self.times:
            return np.zeros(0)
        k, nu = abs(self.ctx.k), self.ctx.nu
        t = np.asarray(self.times)
        e = self._weight(self.zeta)
        sup = np.maximum.accumulate(e * np.asarray(self.weighted_sup))
        w2 = (e * np.asarray(self.omega_l2)) ** 2
        u2 = (e * np.asarray(self.velocity_l2)) ** 2
        cw = np.concatenate([[0.0], np.cumsum(0.5 * (w2[1:] + w2[:-1]) * np.diff(t))])
        cu = np.concatenate([[0.0], np.cumsum(0.5 * (u2[1:] + u2[:-1]) * np.diff(t))])
        return sup + nu**0.25 * math.sqrt(k) * np.sqrt(cw) + k * np.sqrt(cu)

    def weighted_z_integral(self, rate: float) -> float:
        """int e^{2 rate nu^(1/3) t} ||w||_Z^2 dt."""
        t = np.asarray(self.times)
        return _trapezoid(t, self._weight(rate) ** 2 * np.asarray(self.z_norm_sq))

    def inviscid_damping_proxy(self) -> float:
        """|k| ||e^{zeta nu^(1/3) t} u_k||_{L^2_t L^2_y}."""
        t = np.asarray(self.times)
        u = self._weight(self.zeta) * np.asarray(self.velocity_l2)
        return abs(self.ctx.k) * math.sqrt(_trapezoid(t, u**2))

    def rows(self):
        """(t, ||w||, ||rho^(1/2) w||, ||w||_Z^2, ||u||, ||(1-y^2)^(1/2) w||, E) per record."""
        E = self.theorem_energy()
        for i, t in enumerate(self.times):
            yield (t, self.omega_l2[i], self.rho_weighted_l2[i], self.z_norm_sq[i], self.velocity_l2[i], self.weighted_sup[i], E[i])


@dataclass(frozen=True, eq=False)
class Trajectory:
    ctx: WavenumberContext
    grid: SpectralGrid
    times: np.ndarray
    omegas: np.ndarray  # shape (len(times), n_points)

    @property
    def final(self) -> np.ndarray:
        return self.omegas[-1]


def _steps(T: float, dt: float) -> int:
    m = int(round(T / dt))
    if abs(m * dt - T) > 1e-9 * max(T, 1.0):
        m = math.ceil(T / dt)
    return m


def _check_initial(grid, k, omega_in, tol=1e-8):
    scale = max(grid.norm(omega_in), 1e-300)
    for sign in (1, -1):
        if abs(moment_weights(grid, k, sign) @ omega_in) > tol * scale and grid.norm(omega_in) > 0:
            raise ValueError("initial vorticity violates the moment conditions")


def run_direct(omega_in, shear_model, T: float, ctx: WavenumberContext, grid: SpectralGrid,
               forcing: Callable | None = None, dt: float | None = None, record_every: int | None = None,
               zeta: float = 0.01, transport: bool = True, targets: Callable | None = None):
    """Integrate to T with the shear re-evaluated every step.

    ``shear_model`` is a :class:`ShearModel`, an :class:`InitialShear` (heat
    extended on the fly) or a fixed :class:`ShearProfile`.
    ``forcing(t)`` and ``targets(t)`` (moment values) are optional callables.
    Returns (Trajectory, EnergyLedger).
    """
    omega_in = np.asarray(omega_in, dtype=complex)
    if targets is None:
        _check_initial(grid, ctx.k, omega_in)
    dt = dt or default_dt(ctx.nu, ctx.k)
    if isinstance(shear_model, InitialShear):
        shear_model = ShearModel(shear_model, ctx.nu)
    shear_at = shear_model.at if isinstance(shear_model, ShearModel) else (lambda t: shear_model)
    steps = _steps(T, dt)
    record_every = record_every or max(1, steps // 400)
    stepper = LinearStepper(ctx, grid, dt, transport)
    ledger = EnergyLedger(ctx, zeta=zeta)
    state = mode_state(ctx, grid, omega_in, 0.0)
    ledger.record(grid, 0.0, state.omega, state.psi)
    times, snaps = [0.0], [state.omega.copy()]
    hist = None
    for n in range(steps):
        t = n * dt
        F = forcing(t) if forcing is not None else None
        tg = targets((n + 1) * dt) if targets is not None else (0.0, 0.0)
        state, hist = step_linearized(state, shear_at(t), dt, F, hist, tg, stepper)
        state = ModeState(ctx, grid, (n + 1) * dt, state.omega, state.psi)
        ledger.record(grid, state.t, state.omega, state.psi)
        if (n + 1) % record_every == 0 or n + 1 == steps:
            times.append(state.t)
            snaps.append(state.omega.copy())
    return Trajectory(ctx, grid, np.array(times), np.array(snaps)), ledger


# ---------------------------------------------------------------- frozen scheme


@dataclass(eq=False)
class FrozenSchedule:
    interval_length: float
    times: np.ndarray
    components: list  # per j: array (len(times), n) of omega_[j], zero before t_j
    disc_forcings: list  # per j: ||f_Disc[j](t)|| on I_[j] as (t, value) pairs
    frozen_forcings: list
    z_series: list  # per j: ||omega_[j](t)||_Z^2 at every step time
    step_times: np.ndarray

    @property
    def reconstructed(self) -> np.ndarray:
        return sum(self.components)

    def n_components(self) -> int:
        return len(self.components)


def run_frozen(omega_in, init_or_model, T: float, ctx: WavenumberContext, grid: SpectralGrid,
               forcing: Callable | None = None, dt: float | None = None, record_every: int | None = None,
               zeta: float = 0.01, delta: float = 0.1, delta_star: float = 0.04):
    """Layer-cake decomposition over intervals of length nu^(-1/3).

    Component j evolves with the frozen shear U_[j] = U(t_j).  On its own
    interval it carries the external forcing and ik (f_Disc[j] + f_Frozen[j]);
    afterwards it evolves freely.  All components share one stepper and one
    time grid, so their sum reproduces :func:`run_direct` up to round-off.
    Returns (FrozenSchedule, EnergyLedger of the sum).
    """
    model = init_or_model if isinstance(init_or_model, ShearModel) else ShearModel(init_or_model, ctx.nu)
    omega_in = np.asarray(omega_in, dtype=complex)
    _check_initial(grid, ctx.k, omega_in)
    nu, k = ctx.nu, ctx.k
    interval = nu ** (-1.0 / 3.0)
    dt = dt or default_dt(nu, k)
    per = interval / dt
    if abs(per - round(per)) > 1e-9 * per:
        raise ValueError("dt must divide the interval length nu^(-1/3)")
    per = int(round(per))
    steps = _steps(T, dt)
    n_int = (steps - 1) // per + 1 if steps > 0 else 1
    record_every = record_every or max(1, steps // 400)
    stepper = LinearStepper(ctx, grid, dt)
    frozen = [model.at(frozen_time(nu, j)) for j in range(n_int)]

    comps = [omega_in.copy()]
    psis = [helmholtz_inverse(grid, k, omega_in)]
    hist = [None]
    disc, froz = [[]], [[]]
    zs = [[z_norm_sq(grid, ctx, comps[0], psis[0])]]
    snaps = [[comps[0].copy()]]
    times = [0.0]
    ledger = EnergyLedger(ctx, zeta=zeta, delta=delta, delta_star=delta_star)
    ledger.record(grid, 0.0, omega_in, psis[0])
    step_times = [0.0]
    n_points = grid.n_points

    for n in range(steps):
        t = n * dt
        j = min(n // per, n_int - 1)
        while len(comps) <= j:
            comps.append(np.zeros(n_points, dtype=complex))
            psis.append(np.zeros(n_points, dtype=complex))
            # zero history: the component did not exist before t_j
            hist.append(StepHistory(np.zeros(n_points, dtype=complex), np.zeros(n_points, dtype=complex)))
            disc.append([])
            froz.append([])
            zs.append([0.0] * len(step_times))
            snaps.append([np.zeros(n_points, dtype=complex) for _ in times])
        U = model.at(t)
        Uj = frozen[j]
        total_w = sum(comps[: j + 1])
        total_p = sum(psis[: j + 1])
        f_disc = (Uj.u - U.u) * total_w - (Uj.d2u - U.d2u) * total_p
        f_froz = np.zeros(n_points, dtype=complex)
        for jp in range(j):
            f_froz += (Uj.d2u - frozen[jp].d2u) * psis[jp] - (Uj.u - frozen[jp].u) * comps[jp]
        disc[j].append((t, grid.norm(f_disc)))
        froz[j].append((t, grid.norm(f_froz)))
        new_c, new_h = [], []
        for jp in range(j + 1):
            N = stepper.explicit(frozen[jp], comps[jp], psis[jp])
            if jp == j:
                N = N + 1j * k * (f_disc + f_froz)
                if forcing is not None:
                    N = N + forcing(t)
            h = hist[jp]
            if h is None:
                w_new = stepper.solve(comps[jp], N)
            else:
                w_new = stepper.solve(comps[jp], N, h.omega, h.explicit)
            new_h.append(StepHistory(comps[jp], N))
            new_c.append(w_new)
        for jp in range(j + 1):
            comps[jp] = new_c[jp]
            psis[jp] = helmholtz_inverse(grid, k, new_c[jp])
            hist[jp] = new_h[jp]
        tn = (n + 1) * dt
        step_times.append(tn)
        for jp in range(len(comps)):
            zs[jp].append(z_norm_sq(grid, ctx, comps[jp], psis[jp]))
        tot = sum(comps)
        ledger.record(grid, tn, tot, helmholtz_inverse(grid, k, tot))
        if (n + 1) % record_every == 0 or n + 1 == steps:
            times.append(tn)
            for jp in range(len(comps)):
                snaps[jp].append(comps[jp].copy())

    sched = FrozenSchedule(
        interval, np.array(times), [np.array(s) for s in snaps], disc, froz,
        [np.array(z) for z in zs], np.array(step_times),
    )
    fill_frozen_functionals(sched, ledger, nu, delta, delta_star)
    return sched, ledger


def fill_frozen_functionals(sched: FrozenSchedule, ledger: EnergyLedger, nu: float, delta: float, delta_star: float):
    """X_[j], Y_[j] and the total energy from the component Z-norm series."""
    t = sched.step_times
    T = t[-1]
    L = sched.interval_length
    X, Y = {}, {}
    for j, z in enumerate(sched.z_series):
        tj = j * L
        m = t >= tj - 1e-12
        X[j] = math.sqrt(_trapezoid(t[m], np.exp(2 * delta * nu ** (1 / 3) * (t[m] - tj)) * z[m]))
    for j in range(len(sched.z_series)):
        lo, hi = j * L, min((j + 1) * L, T)
        m = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        Y[j] = sum(
            (j - jp + 1) * math.sqrt(_trapezoid(t[m], sched.z_series[jp][m]))
            for jp in range(j + 1)
        )
    ledger.x_functionals = X
    ledger.y_functionals = Y
    ledger.total_energy = float(sum(math.exp(2 * delta_star * j) * Y[j] ** 2 for j in Y))


# ---------------------------------------------------------------- homogeneous split


def passive_component(omega_in, shear: ShearProfile, t: float, k: float, nu: float) -> np.ndarray:
    """w_in exp(-itUk - (1/3)(U')^2 nu k^2 t^3 - nu k^2 t)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return np.asarray(omega_in) * np.exp(
        -1j * t * shear.u * k - (shear.du**2) * nu * k * k * t**3 / 3.0 - nu * k * k * t
    )


def passive_residual_forcing(grid: SpectralGrid, omega_in, shear: ShearProfile, t: float, k: float, nu: float) -> np.ndarray:
    """nu d_yy w1 + (U')^2 nu k^2 t^2 w1 + ik U'' phi1 without cancellation.

    With a = w_in exp(-(1/3)(U')^2 nu k^2 t^3 - nu k^2 t) and b = a', the first
    two terms equal nu e^{-itUk}(b' - 2i U' k t b) - i nu U'' k t w1, so the
    large factors (U' k t)^2 never appear.
    """
    a = np.asarray(omega_in) * np.exp(-(shear.du**2) * nu * k * k * t**3 / 3.0 - nu * k * k * t)
    b = grid.D @ a
    phase = np.exp(-1j * t * shear.u * k)
    w1 = phase * a
    phi1 = helmholtz_inverse(grid, k, w1)
    return nu * phase * (grid.D @ b - 2j * shear.du * k * t * b) - 1j * nu * shear.d2u * k * t * w1 + 1j * k * shear.d2u * phi1


@dataclass(frozen=True, eq=False)
class HomogeneousSplit:
    times: np.ndarray
    passive: np.ndarray
    residual: np.ndarray
    boundary: np.ndarray
    moments: np.ndarray  # (len(times), 2) moments of the sum

    @property
    def total(self) -> np.ndarray:
        return self.passive + self.residual + self.boundary


def homogeneous_split(omega_in, shear: ShearProfile, T: float, ctx: WavenumberContext, grid: SpectralGrid,
                      dt: float | None = None, record_every: int | None = None) -> HomogeneousSplit:
    """Passive part in closed form, residual corrector and boundary corrector by stepping."""
    omega_in = np.asarray(omega_in, dtype=complex)
    k, nu = ctx.k, ctx.nu
    dt = dt or default_dt(nu, k)
    zero = np.zeros_like(omega_in)
    traj2, _ = run_direct(
        zero, shear, T, ctx, grid, dt=dt, record_every=record_every,
        forcing=lambda t: passive_residual_forcing(grid, omega_in, shear, t, k, nu),
    )
    mp, mm = moment_weights(grid, k, 1), moment_weights(grid, k, -1)

    def targets(t):
        w1 = passive_component(omega_in, shear, t, k, nu)
        return (-(mp @ w1), -(mm @ w1))

    traj3, _ = run_direct(zero, shear, T, ctx, grid, dt=dt, record_every=record_every, targets=targets)
    times = traj2.times
    w1 = np.array([passive_component(omega_in, shear, t, k, nu) for t in times])
    total = w1 + traj2.omegas + traj3.omegas
    moments = np.stack([total @ mp, total @ mm], axis=1)
    return HomogeneousSplit(times, w1, traj2.omegas, traj3.omegas, moments)


# ---------------------------------------------------------------- rates


def fit_rate(times, values, window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Decay rate -d/dt log(values) by least squares, and the fit's r^2."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, v = t[m], v[m]
    if t.size < 3:
        raise DegenerateFit("fewer than three samples in the window")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DegenerateFit("series must be positive and finite on the window")
    if v.max() / v.min() < 10.0:
        raise DegenerateFit("series varies by less than one decade on the window")
    lv = np.log(v)
    slope, icept = np.polyfit(t, lv, 1)
    pred = slope * t + icept
    ss_res = float(np.sum((lv - pred) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)


def loglog_slope(x, y) -> tuple[float, np.ndarray]:
    """Slope of log y against log x and the residuals of the fit."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, icept = np.polyfit(lx, ly, 1)
    return float(slope), ly - (slope * lx + icept)
