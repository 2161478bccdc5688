"""Nonlinear perturbation dynamics around the heat-extended shear.

Modes k = 0..K_max are stored; negative k follow from reality,
w_{-k} = conj(w_k).  For k != 0 the velocity is u_k = (-psi_k', ik psi_k)
with psi_k the Dirichlet inverse of Delta_k w_k.  The zero mode carries
only the streamwise velocity u_0 (its vertical part vanishes identically),
with w_0 = -u_0'.

The convolution sums f^i_k = sum_l u^(i)_l w_{k-l} are formed
pseudo-spectrally in x with an alias-free grid of at least 3 K_max + 1
points.  Mode k != 0 is forced by -(ik f^1_k + d/dy f^2_k) and the zero
mode by d/dt u_0 = nu u_0'' + f^2_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla

from .errors import BlowupDetected
from .evolution import (
    EnergyLedger,
    LinearStepper,
    StepHistory,
    _steps,
    default_dt,
    loglog_slope,
    project_moments,
)
from .shear import InitialShear, ShearModel, make_initial_shear, sobolev_norm
from .spectral import SpectralGrid, WavenumberContext, hk_norm, helmholtz_inverse, lu_solve

BLOWUP_FACTOR = 1e6


@dataclass(eq=False)
class PerturbationState:
    grid: SpectralGrid
    nu: float
    t: float
    omega: np.ndarray  # (K_max + 1, n): rows k = 0..K_max; row 0 equals -u0'
    u0: np.ndarray  # zero-mode streamwise velocity, zero at the walls

    @property
    def kmax(self) -> int:
        return self.omega.shape[0] - 1

    def stream(self) -> np.ndarray:
        psi = np.zeros_like(self.omega)
        for k in range(1, self.kmax + 1):
            psi[k] = helmholtz_inverse(self.grid, k, self.omega[k])
        return psi

    def velocities(self, psi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        psi = self.stream() if psi is None else psi
        u1 = -(psi @ self.grid.D.T)
        u1[0] = self.u0
        ks = np.arange(self.kmax + 1)[:, None]
        u2 = 1j * ks * psi
        return u1, u2


def make_state(grid: SpectralGrid, nu: float, kmax: int, modes: dict, u0=None) -> PerturbationState:
    """State from {k: w_k} for k >= 1, plus an optional zero-mode velocity."""
    n = grid.n_points
    omega = np.zeros((kmax + 1, n), dtype=complex)
    for k, w in modes.items():
        if not 1 <= k <= kmax:
            raise ValueError(f"mode {k} outside 1..{kmax}")
        omega[k] = w
    u0 = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float)
    omega[0] = -(grid.D @ u0)
    return PerturbationState(grid, nu, 0.0, omega, u0)


def _full_spectrum(half: np.ndarray, m: int) -> np.ndarray:
    """Rows k = 0..K of a real signal into an rfft array of length m//2 + 1."""
    K = half.shape[0] - 1
    out = np.zeros((m // 2 + 1, half.shape[1]), dtype=complex)
    out[: K + 1] = half
    return out


def physical_grid_size(kmax: int) -> int:
    return 3 * kmax + 2 if (3 * kmax + 2) % 2 == 0 else 3 * kmax + 3


def nonlinear_terms(state: PerturbationState, psi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(f1, f2) for k = 0..K_max, alias-free products in x."""
    u1, u2 = state.velocities(psi)
    K = state.kmax
    m = physical_grid_size(K)
    # rfft convention: the physical field is sum_k c_k e^{ikx}, so scale by m
    to_phys = lambda c: np.fft.irfft(_full_spectrum(c, m), n=m, axis=0) * m
    w = to_phys(state.omega)
    f1 = np.fft.rfft(to_phys(u1) * w, axis=0)[: K + 1] / m
    f2 = np.fft.rfft(to_phys(u2) * w, axis=0)[: K + 1] / m
    return f1, f2


def _extend(half: np.ndarray) -> dict:
    K = half.shape[0] - 1
    out = {k: half[k] for k in range(K + 1)}
    for k in range(1, K + 1):
        out[-k] = np.conj(half[k])
    return out


def nonlinear_terms_direct(state: PerturbationState) -> tuple[np.ndarray, np.ndarray]:
    """Direct O(K^2) convolution; reference for :func:`nonlinear_terms`."""
    u1, u2 = state.velocities()
    K = state.kmax
    U1, U2, W = _extend(u1), _extend(u2), _extend(state.omega)
    f1 = np.zeros_like(state.omega)
    f2 = np.zeros_like(state.omega)
    for k in range(K + 1):
        for l in range(-K, K + 1):
            if abs(k - l) <= K:
                f1[k] += U1[l] * W[k - l]
                f2[k] += U2[l] * W[k - l]
    return f1, f2


def vorticity_forcing(grid: SpectralGrid, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """-(ik f1_k + d/dy f2_k) for every stored k."""
    ks = np.arange(f1.shape[0])[:, None]
    return -(1j * ks * f1 + f2 @ grid.D.T)


class ZeroModeStepper:
    """d/dt u0 = nu u0'' + g with u0(+-1) = 0; diffusion implicit."""

    def __init__(self, grid: SpectralGrid, nu: float, dt: float):
        self.grid, self.nu, self.dt = grid, nu, dt
        n = grid.n_points
        self._lu = {}
        for order, c in ((1, 1.0), (2, 1.5)):
            A = (c / dt) * np.eye(n) - nu * grid.D2
            A[0] = 0.0
            A[-1] = 0.0
            A[0, 0] = A[-1, -1] = 1.0
            self._lu[order] = sla.lu_factor(A)

    def solve(self, u, g, u_prev=None, g_prev=None) -> np.ndarray:
        if u_prev is None:
            rhs = u / self.dt + g
            lu = self._lu[1]
        else:
            rhs = (2.0 * u - 0.5 * u_prev) / self.dt + 2.0 * g - g_prev
            lu = self._lu[2]
        rhs = np.array(rhs, dtype=float)
        rhs[0] = rhs[-1] = 0.0
        return lu_solve(lu, rhs)


def step_zero_mode(state: PerturbationState, dt: float, f2_zero: np.ndarray, stepper: ZeroModeStepper | None = None,
                   history: tuple | None = None):
    """Advance u0 one step with forcing f^2_0; returns (u0_new, w0_new, history)."""
    stepper = stepper or ZeroModeStepper(state.grid, state.nu, dt)
    g = np.real(f2_zero)
    if history is None:
        u_new = stepper.solve(state.u0, g)
    else:
        u_new = stepper.solve(state.u0, g, history[0], history[1])
    return u_new, -(state.grid.D @ u_new), (state.u0, g)


@dataclass(eq=False)
class DNSResult:
    times: np.ndarray
    energy: np.ndarray  # E(T, w) at each step time
    ledgers: dict  # k -> EnergyLedger for k >= 1
    zero_mode_l2: np.ndarray
    final: PerturbationState
    snapshots: dict = field(default_factory=dict)  # k -> array (len(snap_times), n)
    snap_times: np.ndarray | None = None


def theorem_energy(result_ledgers: dict, zero_mode_l2: np.ndarray) -> np.ndarray:
    """sup_t ||w_0|| + sum over k != 0 of the weighted mode energies (both signs of k)."""
    E = np.maximum.accumulate(np.asarray(zero_mode_l2))
    for led in result_ledgers.values():
        E = E + 2.0 * led.theorem_energy()
    return E


def dns_dt(state: PerturbationState, safety: float = 0.1) -> float:
    """An integer fraction of nu^(-1/3) that also resolves the perturbation velocity.

    Streamwise transport is kept at K_max max|u| dt <= safety and the
    vertical one at |v(y)| dt <= safety times the local node spacing.
    """
    grid, K = state.grid, max(state.kmax, 1)
    u1, u2 = state.velocities()
    m = physical_grid_size(K)
    to_phys = lambda c: np.fft.irfft(_full_spectrum(c, m), n=m, axis=0) * m
    umax = 1.0 + float(np.abs(to_phys(u1)).max())
    gaps = np.abs(np.diff(grid.y))
    local = np.minimum(np.r_[gaps, np.inf], np.r_[np.inf, gaps])
    vrate = float((np.abs(to_phys(u2)).max(axis=0) / local).max())
    interval = state.nu ** (-1.0 / 3.0)
    steps = interval / default_dt(state.nu, K, umax)
    steps = max(steps, math.ceil(interval * vrate / safety))
    return interval / steps


def _energy_now(ledgers: dict, zero_l2: list) -> float:
    return max(zero_l2) + 2.0 * sum(float(led.theorem_energy()[-1]) for led in ledgers.values())


def run_dns(state: PerturbationState, shear, T: float, dt: float | None = None, zeta: float = 0.01,
            nonlinear: bool = True, snapshot_modes=(1,), record_every: int | None = None,
            stop_above: float | None = None) -> DNSResult:
    """Co-evolve all modes with the heat-extended shear and the convolution coupling.

    With ``stop_above`` the run ends early once E exceeds that value, since
    a growth verdict cannot be undone by later times; the check runs at
    snapshot cadence.
    """
    grid, nu, K = state.grid, state.nu, state.kmax
    model = shear if isinstance(shear, ShearModel) else ShearModel(shear, nu)
    dt = dt or dns_dt(state)
    steps = _steps(T, dt)
    record_every = record_every or max(1, steps // 400)
    steppers = {k: LinearStepper(WavenumberContext(k, nu), grid, dt) for k in range(1, K + 1)}
    zstep = ZeroModeStepper(grid, nu, dt)
    ledgers = {k: EnergyLedger(WavenumberContext(k, nu), zeta=zeta) for k in range(1, K + 1)}
    omega = state.omega.copy()
    u0 = state.u0.copy()
    cur = PerturbationState(grid, nu, state.t, omega, u0)
    psi = cur.stream()
    for k in ledgers:
        ledgers[k].record(grid, cur.t, omega[k], psi[k])
    zero_l2 = [grid.norm(omega[0])]
    scale0 = max(float(max(grid.norm(omega[k]) for k in range(K + 1))), 1e-300)
    times = [cur.t]
    snaps = {k: [omega[k].copy()] for k in snapshot_modes if 1 <= k <= K}
    snap_t = [cur.t]
    hist = {k: None for k in range(1, K + 1)}
    zhist = None
    for n in range(steps):
        t = state.t + n * dt
        U = model.at(t)
        if nonlinear:
            f1, f2 = nonlinear_terms(cur, psi)
            forcing = vorticity_forcing(grid, f1, f2)
        else:
            f2 = np.zeros_like(omega)
            forcing = np.zeros_like(omega)
        new = np.empty_like(omega)
        for k in range(1, K + 1):
            st = steppers[k]
            N = st.explicit(U, omega[k], psi[k]) + forcing[k]
            h = hist[k]
            new[k] = st.solve(omega[k], N) if h is None else st.solve(omega[k], N, h.omega, h.explicit)
            hist[k] = StepHistory(omega[k], N)
        u_new, w0_new, zhist = step_zero_mode(cur, dt, f2[0], zstep, zhist)
        new[0] = w0_new
        omega, u0 = new, u_new
        cur = PerturbationState(grid, nu, t + dt, omega, u0)
        psi = cur.stream()
        big = max(grid.norm(omega[k]) for k in range(K + 1))
        if not np.isfinite(big) or big > BLOWUP_FACTOR * scale0:
            raise BlowupDetected(f"mode norm {big:.3e} exceeds {BLOWUP_FACTOR:g} x initial at t = {cur.t:.4g}")
        for k in ledgers:
            ledgers[k].record(grid, cur.t, omega[k], psi[k])
        zero_l2.append(grid.norm(omega[0]))
        times.append(cur.t)
        due = (n + 1) % record_every == 0
        stop = due and stop_above is not None and _energy_now(ledgers, zero_l2) > stop_above
        if due or n + 1 == steps:
            snap_t.append(cur.t)
            for k in snaps:
                snaps[k].append(omega[k].copy())
        if stop:
            break
    zero_l2 = np.array(zero_l2)
    return DNSResult(
        np.array(times), theorem_energy(ledgers, zero_l2), ledgers, zero_l2, cur,
        {k: np.array(v) for k, v in snaps.items()}, np.array(snap_t),
    )


# ---------------------------------------------------------------- audits


def enstrophy(state: PerturbationState) -> float:
    g = state.grid
    return float(g.norm(state.omega[0]) ** 2 + 2.0 * sum(g.norm(state.omega[k]) ** 2 for k in range(1, state.kmax + 1)))


def _inviscid_rhs(state: PerturbationState):
    f1, f2 = nonlinear_terms(state)
    return vorticity_forcing(state.grid, f1, f2), np.real(f2[0])


def inviscid_step(state: PerturbationState, dt: float) -> PerturbationState:
    """One Heun (RK2) step of the pure nonlinear transport, no shear, no viscosity.

    Stream functions keep their Dirichlet data and no moment condition is
    imposed, which is the setting in which the transport conserves enstrophy.
    """
    g = state.grid

    def shifted(base, dw, du, h):
        w = base.omega + h * dw
        u0 = base.u0 + h * du
        w[0] = -(g.D @ u0)
        return PerturbationState(g, base.nu, base.t + h, w, u0)

    k1w, k1u = _inviscid_rhs(state)
    mid = shifted(state, k1w, k1u, dt)
    k2w, k2u = _inviscid_rhs(mid)
    return shifted(state, 0.5 * (k1w + k2w), 0.5 * (k1u + k2u), dt)


def enstrophy_audit(state: PerturbationState, dt: float, steps: int = 10) -> float:
    """Largest relative enstrophy change per step over ``steps`` RK2 steps."""
    e0 = enstrophy(state)
    worst = 0.0
    cur = state
    for _ in range(steps):
        nxt = inviscid_step(cur, dt)
        worst = max(worst, abs(enstrophy(nxt) - enstrophy(cur)) / e0)
        cur = nxt
    return worst


# ---------------------------------------------------------------- threshold experiment


def shear_for_kappa(grid: SpectralGrid, kappa: float) -> InitialShear:
    """U_in = y + a sin(pi y) with a chosen so that ||U_in - y||_{H^4} = kappa."""
    base = np.sin(np.pi * grid.y)
    a = kappa / sobolev_norm(grid, base, 4) if kappa > 0 else 0.0
    return make_initial_shear(grid, grid.y + a * base, f"kappa={kappa:g}")


def initial_profile(grid: SpectralGrid, k: int = 1) -> np.ndarray:
    """Fixed smooth profile with both moments removed."""
    y = grid.y
    return project_moments(grid, k, (1.0 - y**2) ** 2 * np.exp(-3.0 * (y - 0.2) ** 2) * (1.0 + 0.5j * y))


def h2_size(state: PerturbationState) -> float:
    """(sum over all k of ||w_k||_{H^2_k}^2)^(1/2), counting both signs of k."""
    g = state.grid
    total = hk_norm(g, state.omega[0], 0, 2) ** 2
    for k in range(1, state.kmax + 1):
        total += 2.0 * hk_norm(g, state.omega[k], k, 2) ** 2
    return math.sqrt(total)


def seeded_state(grid: SpectralGrid, nu: float, kmax: int, amplitude: float) -> PerturbationState:
    """Data in k = +-1 with H^2 size ``amplitude``."""
    prof = initial_profile(grid, 1)
    st = make_state(grid, nu, kmax, {1: prof})
    size = h2_size(st)
    st.omega[1] *= amplitude / size if size > 0 else 0.0
    return st


@dataclass(frozen=True)
class ThresholdRun:
    nu: float
    amplitude: float
    kappa: float
    verdict: str  # "bounded" or "grew"
    sup_energy: float
    initial_energy: float
    blowup: bool = False


def threshold_point(grid, nu, amplitude, kappa, kmax=6, horizon_factor=10.0, growth_factor=10.0, dt=None) -> ThresholdRun:
    if amplitude == 0:
        return ThresholdRun(nu, 0.0, kappa, "bounded", 0.0, 0.0)
    init = shear_for_kappa(grid, kappa)
    st = seeded_state(grid, nu, kmax, amplitude)
    T = horizon_factor * nu ** (-1.0 / 3.0)
    try:
        e0 = float(run_dns(st, init, 0.0, dt=1.0, snapshot_modes=()).energy[0])
        res = run_dns(st, init, T, dt=dt, snapshot_modes=(), stop_above=growth_factor * e0)
    except BlowupDetected:
        return ThresholdRun(nu, amplitude, kappa, "grew", math.inf, math.nan, True)
    sup = float(res.energy.max())
    verdict = "grew" if sup > growth_factor * e0 else "bounded"
    return ThresholdRun(nu, amplitude, kappa, verdict, sup, e0)


def threshold_sweep(grid, nu_list, amplitude_grid, kappa, horizon_factor=10.0, growth_factor=10.0, kmax=6,
                    dt_for=None, pool=None) -> list[ThresholdRun]:
    jobs = [(nu, a) for nu in nu_list for a in amplitude_grid]

    def run(job):
        nu, a = job
        dt = dt_for(nu) if dt_for else None
        return threshold_point(grid, nu, a, kappa, kmax, horizon_factor, growth_factor, dt)

    mapper = pool.map if pool is not None else map
    return list(mapper(run, jobs))


@dataclass(frozen=True)
class BoundaryFit:
    nus: list
    amplitudes: list  # empirical threshold per nu (nan when not bracketed)
    slope: float
    residuals: list
    flips: dict  # nu -> number of verdict changes along the amplitude grid


def stability_boundary(runs: list[ThresholdRun]) -> BoundaryFit:
    """Geometric midpoint of the last bounded and first grown amplitude per nu."""
    nus = sorted({r.nu for r in runs}, reverse=True)
    amps, flips = [], {}
    for nu in nus:
        rs = sorted((r for r in runs if r.nu == nu), key=lambda r: r.amplitude)
        verdicts = [r.verdict for r in rs]
        flips[nu] = sum(1 for a, b in zip(verdicts, verdicts[1:]) if a != b)
        grown = [r.amplitude for r in rs if r.verdict == "grew"]
        below = [r.amplitude for r in rs if r.verdict == "bounded" and 0 < r.amplitude < min(grown, default=0)]
        amps.append(math.sqrt(max(below) * min(grown)) if below else math.nan)
    ok = [(nu, a) for nu, a in zip(nus, amps) if np.isfinite(a)]
    if len(ok) >= 2:
        slope, res = loglog_slope([o[0] for o in ok], [o[1] for o in ok])
        res = list(map(float, res))
    else:
        slope, res = math.nan, []
    return BoundaryFit(nus, amps, slope, res, flips)
