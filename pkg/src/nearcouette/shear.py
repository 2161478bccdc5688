"""Background shear: initial profile, heat extension and frozen shears."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import SpectralGrid, chebyshev_derivatives


@dataclass(frozen=True, eq=False)
class InitialShear:
    """Initial profile U_in on a grid, with kappa = ||U_in - y||_{H^4}."""

    grid: SpectralGrid
    profile: np.ndarray
    kappa: float
    label: str = "custom"

    @property
    def perturbation(self) -> np.ndarray:
        return self.profile - self.grid.y


@dataclass(frozen=True, eq=False)
class ShearProfile:
    """U(t, .) and its first three derivatives at the grid nodes."""

    t: float
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    d3u: np.ndarray

    def at_wall(self, sign: int) -> tuple[float, float]:
        """(U, U') at y = +1 (sign=+1) or y = -1 (sign=-1)."""
        i = 0 if sign > 0 else -1
        return float(self.u[i]), float(self.du[i])


def sobolev_norm(grid: SpectralGrid, f: np.ndarray, order: int) -> float:
    """(sum_{j<=order} ||d^j f||^2)^(1/2)."""
    derivs = chebyshev_derivatives(grid, f, order)
    return float(np.sqrt(sum(grid.norm(g) ** 2 for g in derivs)))


def make_initial_shear(grid: SpectralGrid, profile: np.ndarray, label: str = "custom") -> InitialShear:
    profile = np.asarray(profile, dtype=float)
    if profile.shape != grid.y.shape:
        raise ValueError("profile length must equal the number of grid points")
    if abs(profile[0] - 1.0) > 1e-10 or abs(profile[-1] + 1.0) > 1e-10:
        raise ValueError("initial shear must satisfy U(1) = 1 and U(-1) = -1")
    kappa = sobolev_norm(grid, profile - grid.y, 4)
    return InitialShear(grid, profile, kappa, label)


def couette(grid: SpectralGrid) -> InitialShear:
    return make_initial_shear(grid, grid.y.copy(), "couette")


def sine_shear(grid: SpectralGrid, amplitude: float) -> InitialShear:
    """U_in = y + a sin(pi y); even derivatives vanish at the walls."""
    y = grid.y
    return make_initial_shear(grid, y + amplitude * np.sin(np.pi * y), f"sine({amplitude:g})")


def tabulated_shear(grid: SpectralGrid, path: str | Path) -> InitialShear:
    """Two-column text file (y, U) fitted by a Chebyshev series."""
    data = np.loadtxt(path, dtype=float, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 4:
        raise ValueError(f"{path}: expected at least four rows of two columns")
    ys, us = data[:, 0], data[:, 1]
    if ys.min() < -1.0 - 1e-12 or ys.max() > 1.0 + 1e-12:
        raise ValueError(f"{path}: samples must lie in [-1, 1]")
    deg = min(grid.n_points - 1, ys.size - 1)
    coef = np.polynomial.chebyshev.chebfit(ys, us - ys, deg)
    pert = np.polynomial.chebyshev.chebval(grid.y, coef)
    # pin the wall values; the fit leaves a residual there
    pert = pert - 0.5 * (pert[0] + pert[-1]) - 0.5 * (pert[0] - pert[-1]) * grid.y
    return make_initial_shear(grid, grid.y + pert, f"file({Path(path).name})")


_SINE = re.compile(r"^sine\(\s*([-+0-9.eE]+)\s*\)$")


def parse_shear_spec(grid: SpectralGrid, spec: str, base_dir: str | Path | None = None) -> InitialShear:
    """'couette', 'sine(a)' or a path to a two-column file."""
    spec = spec.strip()
    if spec == "couette":
        return couette(grid)
    m = _SINE.match(spec)
    if m:
        return sine_shear(grid, float(m.group(1)))
    path = Path(spec)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    if not path.exists():
        raise ValueError(f"unknown shear spec {spec!r}")
    return tabulated_shear(grid, path)


def _heat_modes(grid: SpectralGrid):
    key = "heat_eig"
    if key not in grid._cache:
        A = grid.D2[1:-1, 1:-1]
        lam, V = np.linalg.eig(A)
        # the Dirichlet collocation Laplacian has a real negative spectrum
        order = np.argsort(-lam.real)
        lam = lam[order].real
        V = V[:, order].real
        grid._cache[key] = (lam, V, np.linalg.inv(V))
    return grid._cache[key]


def heat_semigroup(grid: SpectralGrid, f: np.ndarray, nu: float, t: float) -> np.ndarray:
    """exp(nu t d_yy) f with homogeneous Dirichlet data."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    lam, V, Vinv = _heat_modes(grid)
    out = np.zeros_like(np.asarray(f, dtype=float))
    out[1:-1] = V @ (np.exp(nu * t * lam) * (Vinv @ f[1:-1]))
    return out


def profile_from_values(grid: SpectralGrid, u: np.ndarray, t: float = 0.0) -> ShearProfile:
    # differentiate the perturbation so the chop threshold follows its size
    _, dp, d2u, d3u = chebyshev_derivatives(grid, u - grid.y, 3)
    return ShearProfile(float(t), u, 1.0 + dp, d2u, d3u)


def heat_extend(init: InitialShear, nu: float, t: float) -> ShearProfile:
    """U(t) = y + exp(nu t d_yy)(U_in - y)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    grid = init.grid
    if t == 0:
        u = init.profile.copy()
    else:
        u = grid.y + heat_semigroup(grid, init.perturbation, nu, t)
    return profile_from_values(grid, u, t)


def frozen_time(nu: float, j: int) -> float:
    return j * nu ** (-1.0 / 3.0)


def frozen_shear(init: InitialShear, nu: float, j: int) -> ShearProfile:
    """Heat extension at t_j = j nu^(-1/3)."""
    if int(j) != j or j < 0:
        raise ValueError("interval index j must be a nonnegative integer")
    return heat_extend(init, nu, frozen_time(nu, int(j)))


class ShearModel:
    """Time-dependent U(t, .) with a small memo of recent evaluations."""

    def __init__(self, init: InitialShear, nu: float):
        self.init = init
        self.nu = nu
        self.grid = init.grid
        self._memo: dict[float, ShearProfile] = {}
        self.steady = init.kappa == 0.0

    def at(self, t: float) -> ShearProfile:
        if self.steady:
            t = 0.0
        prof = self._memo.get(t)
        if prof is None:
            if len(self._memo) > 64:
                self._memo.clear()
            prof = heat_extend(self.init, self.nu, t)
            self._memo[t] = prof
        return prof

    def frozen(self, j: int) -> ShearProfile:
        return self.at(frozen_time(self.nu, j))


@dataclass(frozen=True)
class DriftReport:
    sup_ratio: float
    d2_gap: float
    constant: float


def drift_probe(init: InitialShear, nu: float, s: float, t: float) -> DriftReport:
    """Drift of the heat extension between times s and t.

    sup_y |U(t)-U(s)|/(1-|y|) uses interior nodes plus the one-sided wall
    limits (U(t)-U(s))'(+-1); the constant is the larger of both quantities
    divided by nu |t-s| ||U_in - y||_{H^4}.
    """
    if not t >= s >= 0:
        raise ValueError("need t >= s >= 0")
    grid = init.grid
    a = heat_extend(init, nu, s)
    b = heat_extend(init, nu, t)
    diff = b.u - a.u
    ddiff = b.du - a.du
    inner = np.abs(diff[1:-1]) / (1.0 - np.abs(grid.y[1:-1]))
    sup = max(float(inner.max()), abs(ddiff[0]), abs(ddiff[-1]))
    gap = grid.norm(b.d2u - a.d2u)
    scale = nu * abs(t - s) * init.kappa
    const = max(sup, gap) / scale if scale > 0 else 0.0
    if t == s or init.kappa == 0.0:
        sup, gap, const = 0.0, 0.0, 0.0
    return DriftReport(sup, gap, const)


def wall_curvature(init_or_profile, grid: SpectralGrid | None = None) -> tuple[float, float]:
    """Largest |d^2 (U - y)| and |d^4 (U - y)| over the two walls."""
    if isinstance(init_or_profile, InitialShear):
        grid = init_or_profile.grid
        pert = init_or_profile.perturbation
    else:
        pert = init_or_profile.u - grid.y
    d = chebyshev_derivatives(grid, pert, 4)
    return float(np.abs(d[2][[0, -1]]).max()), float(np.abs(d[4][[0, -1]]).max())


def is_compatible(init: InitialShear, tol2: float = 1e-10, tol4: float = 1e-7) -> bool:
    """Second and fourth derivatives of U_in - y vanish at both walls.

    The fourth derivative at a wall carries a round-off floor near 1e-9
    relative, hence the looser default tolerance for it.
    """
    scale = max(1.0, init.kappa)
    d2, d4 = wall_curvature(init)
    return d2 <= tol2 * scale and d4 <= tol4 * scale
