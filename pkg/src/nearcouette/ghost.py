"""The ghost singular integral operator J_k and its commutator with d/dy.

    J_k[f](y) = k p.v. int G_k(y, y') f(y') / (2i (y - y')) dy'
    H_k[f](y) = [d/dy, J_k] f = k p.v. int h_k(y, y') f(y') / (2i (y - y')) dy'

with h_k(y, y') = sinh(k (y + y')) / sinh(2k), which is (d/dy + d/dy') G_k.

Each row is discretized by splitting the integral at the diagonal.  On
either side the numerator is analytic, so the difference quotient
(K(y,y') f(y') - K(y,y) f(y)) / (y - y') is integrated by Gauss-Legendre
quadrature with f interpolated from the grid, and the remaining
K(y,y) f(y) p.v. int dy'/(y - y') = K(y,y) f(y) log((1+y)/(1-y)) is exact.
Using the one-sided formulas for G_k keeps every evaluated value bounded,
so large k loses no accuracy to cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shear import ShearProfile
from .spectral import (
    SpectralGrid,
    WavenumberContext,
    barycentric_matrix,
    grad_k_norm,
    helmholtz_inverse,
)


@dataclass(frozen=True, eq=False)
class GhostKernel:
    ctx: WavenumberContext
    grid: SpectralGrid
    jk_matrix: np.ndarray
    hk_matrix: np.ndarray


def _pv_rows(grid: SpectralGrid, left, right, quad_points: int) -> np.ndarray:
    """Rows of p.v. int K(y_i, y') f(y') / (y_i - y') dy' at interior nodes.

    ``left(yi, t)`` is K for t <= yi and ``right(yi, t)`` for t >= yi.
    """
    y = grid.y
    n = y.size
    x, wx = np.polynomial.legendre.leggauss(quad_points)
    M = np.zeros((n, n))
    for i in range(1, n - 1):
        yi = y[i]
        diag = left(yi, np.array([yi]))[0]
        for a, b, ker in ((-1.0, yi, left), (yi, 1.0, right)):
            t = 0.5 * (a + b) + 0.5 * (b - a) * x
            c = 0.5 * (b - a) * wx / (yi - t)
            M[i] += (c * ker(yi, t)) @ barycentric_matrix(y, t)
            M[i, i] -= diag * c.sum()
        M[i, i] += diag * np.log((1.0 + yi) / (1.0 - yi))
    return M


def jk_matrix(grid: SpectralGrid, k: float, quad_points: int | None = None) -> np.ndarray:
    """Dense matrix of J_k; rows at y = +-1 are zero since G_k(+-1, .) = 0."""
    if k == 0:
        raise ValueError("wavenumber k must be nonzero")
    m = quad_points or grid.n_points
    s2 = np.sinh(2.0 * k)

    def below(yi, t):
        return -np.sinh(k * (1.0 + t)) * np.sinh(k * (1.0 - yi)) / (k * s2)

    def above(yi, t):
        return -np.sinh(k * (1.0 + yi)) * np.sinh(k * (1.0 - t)) / (k * s2)

    return (k / 2j) * _pv_rows(grid, below, above, m)


def hk_matrix(grid: SpectralGrid, k: float, quad_points: int | None = None) -> np.ndarray:
    """Dense matrix of the commutator [d/dy, J_k].

    At the walls the integral converges only for f(+-1) = 0; those rows keep
    the convergent difference-quotient part and drop the divergent
    f(+-1) log term.
    """
    if k == 0:
        raise ValueError("wavenumber k must be nonzero")
    m = quad_points or grid.n_points
    s2 = np.sinh(2.0 * k)

    def h(yi, t):
        return np.sinh(k * (yi + t)) / s2

    M = _pv_rows(grid, h, h, m)
    y = grid.y
    x, wx = np.polynomial.legendre.leggauss(m)
    P = barycentric_matrix(y, x)
    for i in (0, y.size - 1):
        c = wx * h(y[i], x) / (y[i] - x)
        M[i] = c @ P
        M[i, i] -= c.sum()
    return (k / 2j) * M


def build_ghost(ctx: WavenumberContext, grid: SpectralGrid) -> GhostKernel:
    key = ("ghost", ctx.k)
    if key not in grid._cache:
        J = jk_matrix(grid, ctx.k)
        H = hk_matrix(grid, ctx.k)
        J.setflags(write=False)
        H.setflags(write=False)
        grid._cache[key] = (J, H)
    J, H = grid._cache[key]
    return GhostKernel(ctx, grid, J, H)


def apply_jk(kernel: GhostKernel, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if f.shape[0] != kernel.grid.n_points:
        raise ValueError("field does not live on the kernel's grid")
    return kernel.jk_matrix @ f


def commutator_residual(kernel: GhostKernel, f: np.ndarray) -> np.ndarray:
    D = kernel.grid.D
    J = kernel.jk_matrix
    return D @ (J @ f) - J @ (D @ f) - kernel.hk_matrix @ f


def commutator_check(kernel: GhostKernel, f: np.ndarray) -> float:
    """|| d/dy J f - J df/dy - H f ||_{L^2}."""
    return kernel.grid.norm(commutator_residual(kernel, f))


@dataclass(frozen=True)
class PairingDefects:
    conjugation: float
    antisymmetry: float
    imaginary_part: float


def pairing_defects(kernel: GhostKernel, f: np.ndarray, g: np.ndarray) -> PairingDefects:
    """Defects of the structural identities of J_k, each normalized by norms.

    conjugation:    || conj(J f) + J conj(f) || / ||f||
    antisymmetry:   | int conj(f) J g + int J[conj(f)] g | / (||f|| ||g||)
    imaginary_part: | Im <f, J f> | / ||f||^2
    """
    grid = kernel.grid
    J = kernel.jk_matrix
    nf, ng = grid.norm(f), grid.norm(g)
    if nf == 0.0 or ng == 0.0:
        return PairingDefects(0.0, 0.0, 0.0)
    conj = grid.norm(np.conj(J @ f) + J @ np.conj(f)) / nf
    anti = abs(grid.integrate(np.conj(f) * (J @ g)) + grid.integrate((J @ np.conj(f)) * g)) / (nf * ng)
    imag = abs(grid.inner(f, J @ f).imag) / nf**2
    return PairingDefects(float(conj), float(anti), float(imag))


def operator_norm(grid: SpectralGrid, matrix: np.ndarray, iterations: int = 300, seed: int = 0) -> float:
    """L^2 operator norm on fields vanishing at the walls, by power iteration."""
    sw = np.sqrt(grid.w[1:-1])
    A = sw[:, None] * matrix[1:-1, 1:-1] / sw[None, :]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iterations):
        u = A.conj().T @ (A @ v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        if abs(np.sqrt(nu) - sigma) <= 1e-12 * max(sigma, 1e-300):
            sigma = np.sqrt(nu)
            break
        sigma = np.sqrt(nu)
    return float(sigma)


@dataclass(frozen=True)
class TransferProbe:
    transport: float
    nonlocal_: float
    viscous: float
    grad_phi_sq: float
    grad_w_sq: float

    def signed(self, c_delta: float, c_nu: float, nu: float, k: float) -> tuple[float, float, float]:
        """The three quantities whose nonpositivity expresses the transfer bounds."""
        q1 = self.transport + k * k / 16.0 * self.grad_phi_sq
        q2 = abs(self.nonlocal_) - c_delta * self.grad_phi_sq
        q3 = self.viscous - c_nu * nu * self.grad_w_sq
        return q1, q2, q3


def transfer_probe(kernel: GhostKernel, shear: ShearProfile, w: np.ndarray, nu: float) -> TransferProbe:
    """Pairings of the resolvent terms against J_k w.

    transport = Re<-U ik w, J w>, nonlocal_ = Re<U'' ik phi, J w>,
    viscous = Re<nu Delta_k w, J w>, with phi = Delta_k^{-1} w.
    """
    grid = kernel.grid
    k = kernel.ctx.k
    w = np.asarray(w, dtype=complex)
    phi = helmholtz_inverse(grid, k, w)
    Jw = kernel.jk_matrix @ w
    lap_w = grid.D2 @ w - k * k * w
    transport = grid.inner(-shear.u * 1j * k * w, Jw).real
    nonlocal_ = grid.inner(shear.d2u * 1j * k * phi, Jw).real
    viscous = grid.inner(nu * lap_w, Jw).real
    return TransferProbe(
        float(transport),
        float(nonlocal_),
        float(viscous),
        grad_k_norm(grid, phi, k) ** 2,
        grad_k_norm(grid, w, k) ** 2,
    )


def smooth_random_field(grid: SpectralGrid, rng: np.random.Generator, modes: int = 40, decay: float = 0.3) -> np.ndarray:
    """Random complex field with geometrically decaying Chebyshev content, zero at the walls."""
    c = (rng.standard_normal(modes) + 1j * rng.standard_normal(modes)) * np.exp(-decay * np.arange(modes))
    return np.polynomial.chebyshev.chebval(grid.y, c) * (1.0 - grid.y**2)
