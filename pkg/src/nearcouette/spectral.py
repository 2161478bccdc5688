"""Chebyshev-Lobatto discretization of the channel [-1, 1].

Fields are plain complex (or real) numpy arrays holding nodal values on a
:class:`SpectralGrid`.  Nodes are ordered from ``y = 1`` down to ``y = -1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import threading

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

MIN_POINTS = 8


@dataclass(frozen=True)
class WavenumberContext:
    """A streamwise wavenumber ``k`` together with the viscosity ``nu``."""

    k: int
    nu: float

    def __post_init__(self):
        if self.k == 0:
            raise ValueError("wavenumber k must be nonzero")
        if not self.nu > 0:
            raise ValueError("viscosity nu must be positive")

    @property
    def L(self) -> float:
        """Boundary-layer scale nu^(-1/3) |k|^(1/3)."""
        return self.nu ** (-1.0 / 3.0) * abs(self.k) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    n_points: int
    nodes: np.ndarray
    diff_matrix: np.ndarray
    quad_weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def y(self) -> np.ndarray:
        return self.nodes

    @property
    def D(self) -> np.ndarray:
        return self.diff_matrix

    @property
    def w(self) -> np.ndarray:
        return self.quad_weights

    @property
    def D2(self) -> np.ndarray:
        if "D2" not in self._cache:
            self._cache["D2"] = self.D @ self.D
        return self._cache["D2"]

    def derivative(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        out = np.asarray(f)
        for _ in range(order):
            out = self.D @ out
        return out

    def integrate(self, f: np.ndarray) -> complex:
        return self.quad_weights @ f

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """L2 inner product <f, g> = int conj(f) g dy."""
        return self.quad_weights @ (np.conj(f) * g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(self.quad_weights @ np.abs(f) ** 2, 0.0)))

    def interpolation_matrix(self, points: np.ndarray) -> np.ndarray:
        return barycentric_matrix(self.nodes, np.asarray(points, dtype=float))

    def antiderivative_from_top(self) -> np.ndarray:
        """Matrix Q with (Q f)_i = int_{y_i}^{1} f dy."""
        if "Q" not in self._cache:
            self._cache["Q"] = _antiderivative_matrix(self.n_points, self.nodes)
        return self._cache["Q"]


def _cheb_nodes(n: int) -> np.ndarray:
    j = np.arange(n)
    # sin form gives exactly symmetric nodes and exact endpoints
    y = np.sin(np.pi * (n - 1 - 2 * j) / (2 * (n - 1)))
    y[0], y[-1] = 1.0, -1.0
    return y


def _cheb_diff(y: np.ndarray) -> np.ndarray:
    n = y.size
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dy = y[:, None] - y[None, :]
    D = np.outer(c, 1.0 / c) / (dy + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return D


def _clenshaw_curtis(n: int) -> np.ndarray:
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    interior = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for m in range(1, N // 2):
            v -= 2.0 * np.cos(2 * m * theta[interior]) / (4 * m * m - 1)
        v -= np.cos(N * theta[interior]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for m in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * m * theta[interior]) / (4 * m * m - 1)
    w[interior] = 2.0 * v / N
    return w


def _antiderivative_matrix(n: int, y: np.ndarray) -> np.ndarray:
    C = np.polynomial.chebyshev
    V = C.chebvander(y, n - 1)
    coeffs = np.linalg.solve(V, np.eye(n))
    integ = C.chebint(coeffs, lbnd=1.0, axis=0)
    # chebint with lbnd=1 gives int_1^y; flip sign for int_y^1
    return -C.chebvander(y, n) @ integ


def barycentric_matrix(nodes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Polynomial interpolation from Chebyshev-Lobatto ``nodes`` to ``points``."""
    n = nodes.size
    bw = (-1.0) ** np.arange(n)
    bw[0] *= 0.5
    bw[-1] *= 0.5
    diff = points[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    M = bw[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for r in rows:
        M[r] = exact[r].astype(float)
    return M


@lru_cache(maxsize=32)
def build_grid(n_points: int) -> SpectralGrid:
    """Chebyshev-Lobatto grid with ``n_points`` nodes (shared, read-only)."""
    if int(n_points) != n_points or n_points < MIN_POINTS:
        raise ValueError(f"n_points must be an integer >= {MIN_POINTS}, got {n_points}")
    n = int(n_points)
    y = _cheb_nodes(n)
    D = _cheb_diff(y)
    w = _clenshaw_curtis(n)
    for arr in (y, D, w):
        arr.setflags(write=False)
    return SpectralGrid(n, y, D, w)


# scipy's f2py LAPACK wrappers (getrs, gecon) corrupt the heap when called
# from several threads at once with some OpenBLAS builds; serialize them
LAPACK_LOCK = threading.Lock()


def lu_solve(factor, b: np.ndarray) -> np.ndarray:
    """Thread-safe ``scipy.linalg.lu_solve``."""
    with LAPACK_LOCK:
        return sla.lu_solve(factor, b)


def _helmholtz_lu(grid: SpectralGrid, k: float):
    key = ("helm", float(k))
    if key not in grid._cache:
        A = grid.D2 - (k * k) * np.eye(grid.n_points)
        A[0] = 0.0
        A[-1] = 0.0
        A[0, 0] = A[-1, -1] = 1.0
        grid._cache[key] = sla.lu_factor(A)
    return grid._cache[key]


def helmholtz_inverse(grid: SpectralGrid, k: float, rhs: np.ndarray) -> np.ndarray:
    """Dirichlet inverse of d^2/dy^2 - k^2: returns phi with phi(+-1) = 0."""
    b = np.array(rhs, dtype=complex if np.iscomplexobj(rhs) else float)
    b[0] = 0.0
    b[-1] = 0.0
    return lu_solve(_helmholtz_lu(grid, k), b)


def helmholtz_inverse_matrix(grid: SpectralGrid, k: float) -> np.ndarray:
    """Dense matrix of the Dirichlet inverse (boundary rows of the input ignored)."""
    key = ("helminv", float(k))
    if key not in grid._cache:
        E = np.eye(grid.n_points)
        E[0, 0] = E[-1, -1] = 0.0
        grid._cache[key] = lu_solve(_helmholtz_lu(grid, k), E)
    return grid._cache[key]


def greens_kernel(k: float, y, yp):
    """Green's function of d^2/dy^2 - k^2 on [-1, 1] with Dirichlet data."""
    y, yp = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(yp, dtype=float))
    lo = np.minimum(y, yp)
    hi = np.maximum(y, yp)
    return -np.sinh(k * (1.0 + lo)) * np.sinh(k * (1.0 - hi)) / (k * np.sinh(2.0 * k))


def hk_norm(grid: SpectralGrid, f: np.ndarray, k: float, order: int) -> float:
    """(sum_{a+b=order} || |k|^a d^b f ||^2)^(1/2)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    total = 0.0
    deriv = np.asarray(f)
    for beta in range(order + 1):
        alpha = order - beta
        total += abs(k) ** (2 * alpha) * grid.norm(deriv) ** 2
        deriv = grid.D @ deriv
    return float(np.sqrt(total))


def grad_k_norm(grid: SpectralGrid, f: np.ndarray, k: float) -> float:
    """||nabla_k f|| = (||f'||^2 + k^2 ||f||^2)^(1/2)."""
    return hk_norm(grid, f, k, 1)


def moment_weights(grid: SpectralGrid, k: float, sign: int) -> np.ndarray:
    return grid.quad_weights * np.exp(sign * k * grid.nodes)


def boundary_moment(grid: SpectralGrid, f: np.ndarray, k: float, sign: int) -> complex:
    """int_{-1}^{1} exp(sign*k*y) f(y) dy."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return complex(moment_weights(grid, k, sign) @ f)


def h_minus1_norm(grid: SpectralGrid, F: np.ndarray, k: float) -> float:
    """Dual norm of F against H^1_0 test functions normalised by ||nabla_k g||.

    The supremum is attained at g = -(Delta_k)^{-1} F, so the norm equals
    (-<F, Delta_k^{-1} F>)^(1/2) computed with one Dirichlet solve.
    """
    g = helmholtz_inverse(grid, k, F)
    val = -np.real(grid.inner(F, g))
    return float(np.sqrt(max(val, 0.0)))


def rho_weight(grid: SpectralGrid, L: float) -> np.ndarray:
    """Boundary weight min{L(1-|y|), 1}."""
    return np.minimum(L * (1.0 - np.abs(grid.nodes)), 1.0)


def chebyshev_coefficients(f: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through Lobatto nodal values."""
    f = np.asarray(f)
    N = f.shape[0] - 1
    c = sfft.dct(f, type=1, axis=0) / N
    c[0] *= 0.5
    c[N] *= 0.5
    return c


def chebyshev_derivatives(grid: SpectralGrid, f: np.ndarray, order: int, chop: float = 1e-14) -> list:
    """[f, f', ..., f^(order)] at the nodes from a chopped Chebyshev series.

    Coefficients below ``chop`` times the largest one are dropped before
    differentiating, which keeps high derivatives free of amplified round-off.
    """
    c = chebyshev_coefficients(np.asarray(f))
    mag = np.abs(c)
    keep = np.nonzero(mag > chop * max(mag.max(), 1e-300))[0]
    c = c.copy()
    if keep.size:
        c[keep[-1] + 1:] = 0.0
    else:
        c[:] = 0.0
    out = [np.asarray(f)]
    C = np.polynomial.chebyshev
    for _ in range(order):
        c = C.chebder(c)
        out.append(C.chebval(grid.nodes, c) if np.isrealobj(c) else C.chebval(grid.nodes, c.real) + 1j * C.chebval(grid.nodes, c.imag))
    return out
