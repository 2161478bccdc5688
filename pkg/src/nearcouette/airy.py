"""Complex Airy function Ai(z) and the ray integral A0(z).

Ai is evaluated by its Maclaurin series for |z| <= 2 and by the large-|z|
asymptotic expansion for |z| > 9.  Outside the sector |arg z| <= 2 pi / 3
the connection formula Ai(z) = -w Ai(w z) - w^2 Ai(w^2 z),
w = exp(2 pi i / 3), moves both evaluations back inside the sector where
the expansion has no Stokes switching.

In between, the series cancels badly, so Ai'' = z Ai is integrated along
the ray through z by recentred Taylor steps, always in the direction in
which Ai is not recessive: inward from |z| = 11 when |arg z| < pi / 3,
outward from |z| = 2 otherwise.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AiryEvalFailure

SERIES_RADIUS = 9.0  # beyond this the asymptotic expansion is used
TAYLOR_RADIUS = 2.0  # below this the Maclaurin series is used
_OUTER_START = 11.0
_STEP = 0.5
_TAYLOR_ORDER = 40
_AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
_AIP0 = 1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))
_OMEGA = np.exp(2j * np.pi / 3.0)
_ROT = np.exp(1j * np.pi / 6.0)


def _asymptotic_coeffs(n: int) -> np.ndarray:
    u = np.empty(n)
    u[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
    return u


_U = _asymptotic_coeffs(60)


def _series(z: np.ndarray, derivative: bool = False):
    """Ai(z), and Ai'(z) when ``derivative`` is set."""
    z3 = z**3
    f = np.ones_like(z)
    g = z.copy()
    tf = np.ones_like(z)
    tg = z.copy()
    for k in range(1, 200):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        f = f + tf
        g = g + tg
        if np.all(np.abs(tf) <= 1e-17 * np.abs(f)) and np.all(np.abs(tg) <= 1e-17 * np.abs(g) + 1e-300):
            break
    else:
        raise AiryEvalFailure("Maclaurin series for Ai did not converge")
    if not derivative:
        return _AI0 * f - _AIP0 * g
    # f' = z^2 sum 3k t_k / z^3 and g' = sum (3k + 1) t_k / z, summed term by term
    fp = np.zeros_like(z)
    gp = np.ones_like(z)
    tf = np.ones_like(z)
    tg = z.copy()
    for k in range(1, 200):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        fp = fp + 3 * k * tf / np.where(z == 0, 1.0, z)
        gp = gp + (3 * k + 1) * tg / np.where(z == 0, 1.0, z)
        if np.all(np.abs(tf) <= 1e-17 * np.abs(f)) and np.all(np.abs(tg) <= 1e-17 * np.abs(g) + 1e-300):
            break
    return _AI0 * f - _AIP0 * g, _AI0 * fp - _AIP0 * gp


def _asymptotic_sector(z: np.ndarray, shift: np.ndarray, derivative: bool = False):
    """Expansion valid for |arg z| <= 2 pi / 3 and large |z|, times exp(shift).

    With ``derivative`` the pair (Ai, Ai') is returned.
    """
    zeta = (2.0 / 3.0) * z**1.5
    inv = -1.0 / zeta
    total = np.zeros_like(z)
    dtotal = np.zeros_like(z)
    prev = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(_U.size):
        term = _U[k] * inv**k
        mag = np.abs(term)
        # stop each entry at its smallest term
        active &= mag < prev
        total = np.where(active, total + term, total)
        dtotal = np.where(active, dtotal - (6 * k + 1) / (6 * k - 1) * term, dtotal)
        prev = np.where(active, mag, prev)
        if not active.any():
            break
    log_pref = shift - zeta - math.log(2.0 * math.sqrt(math.pi))
    ai = np.exp(log_pref - 0.25 * np.log(z)) * total
    if not derivative:
        return ai
    return ai, -np.exp(log_pref + 0.25 * np.log(z)) * dtotal


def _taylor_march(start: np.ndarray, w: np.ndarray, wp: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Carry (Ai, Ai') from ``start`` to ``end`` along straight segments of length <= _STEP."""
    steps = int(np.ceil(np.abs(end - start).max() / _STEP)) if start.size else 0
    h = (end - start) / max(steps, 1)
    c = start.copy()
    for _ in range(steps):
        # a_{n+2} = (c a_n + a_{n-1}) / ((n+1)(n+2)) from Ai'' = z Ai about c
        a_prev, a0, a1 = np.zeros_like(w), w, wp
        new_w = a0 + a1 * h
        new_wp = a1.copy()
        hp = h.copy()  # h^(n+1) for the derivative sum, starts at h^1
        hn = h * h  # h^(n+2)
        for n in range(_TAYLOR_ORDER):
            a2 = (c * a0 + a_prev) / ((n + 1) * (n + 2))
            new_w = new_w + a2 * hn
            new_wp = new_wp + (n + 2) * a2 * hp
            a_prev, a0, a1 = a0, a1, a2
            hp = hp * h
            hn = hn * h
        w, wp, c = new_w, new_wp, c + h
    return w


def _ray_march(z: np.ndarray) -> np.ndarray:
    """Ai on TAYLOR_RADIUS < |z| <= SERIES_RADIUS by Taylor steps along the ray."""
    out = np.empty_like(z)
    unit = z / np.abs(z)
    recessive = np.abs(np.angle(z)) < np.pi / 3.0
    if recessive.any():
        z0 = _OUTER_START * unit[recessive]
        w, wp = _asymptotic_sector(z0, np.zeros(z0.shape), derivative=True)
        out[recessive] = _taylor_march(z0, w, wp, z[recessive])
    if (~recessive).any():
        z0 = TAYLOR_RADIUS * unit[~recessive]
        w, wp = _series(z0, derivative=True)
        out[~recessive] = _taylor_march(z0, w, wp, z[~recessive])
    return out


def _asymptotic(z: np.ndarray, shift: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    arg = np.angle(z)
    inside = np.abs(arg) <= 2.0 * np.pi / 3.0
    if inside.any():
        out[inside] = _asymptotic_sector(z[inside], shift[inside])
    if (~inside).any():
        zo = z[~inside]
        so = shift[~inside]
        # rotate so that both images land in |arg| <= 2 pi / 3
        upper = np.angle(zo) > 0
        w1 = np.where(upper, _OMEGA.conjugate(), _OMEGA)
        w2 = w1 * w1
        # Ai(z) = -w Ai(w z) - w^2 Ai(w^2 z) holds for w and for conj(w)
        out[~inside] = -w1 * _asymptotic_sector(w1 * zo, so) - w2 * _asymptotic_sector(w2 * zo, so)
    return out


def airy_ai(z, log_scale=0.0) -> np.ndarray:
    """Ai(z) * exp(log_scale) for complex array input.

    The real ``log_scale`` lets callers evaluate Ai where it over- or
    underflows, as long as only ratios or linear combinations are needed.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    shift = np.broadcast_to(np.asarray(log_scale, dtype=float), z.shape)
    out = np.empty_like(z)
    r = np.abs(z)
    small = r <= TAYLOR_RADIUS
    middle = (r > TAYLOR_RADIUS) & (r <= SERIES_RADIUS)
    large = r > SERIES_RADIUS
    if small.any():
        out[small] = _series(z[small]) * np.exp(shift[small])
    if middle.any():
        out[middle] = _ray_march(z[middle]) * np.exp(shift[middle])
    if large.any():
        out[large] = _asymptotic(z[large], shift[large])
    if not np.all(np.isfinite(out)):
        raise AiryEvalFailure("Ai evaluation produced non-finite values")
    return out[0] if scalar else out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X10, _GL_W10 = np.polynomial.legendre.leggauss(10)


def _panel(fun, a: float, b: float):
    h = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    hi = h * (_GL_W @ fun(mid + h * _GL_X))
    lo = h * (_GL_W10 @ fun(mid + h * _GL_X10))
    return hi, abs(hi - lo)


def _adaptive_gauss(fun, a: float, b: float, tol: float, depth: int = 14, floor: float = 0.0) -> complex:
    """Adaptive GL20/GL10 quadrature; a panel is accepted when its error
    estimate is below tol * |value| or below ``floor`` times its length."""
    stack = [(a, b, 0)]
    total = 0.0j
    while stack:
        lo, hi, level = stack.pop()
        val, err = _panel(fun, lo, hi)
        if err <= max(tol * abs(val), floor * (hi - lo)) or err < 1e-300 or level >= depth:
            total += val
        else:
            m = 0.5 * (lo + hi)
            stack.append((lo, m, level + 1))
            stack.append((m, hi, level + 1))
    return total


def airy_log_magnitude(z: complex) -> float:
    """Leading-order log|Ai(z)|, used to pick scales; 0 for |z| <= SERIES_RADIUS."""
    z = complex(z)
    if abs(z) <= SERIES_RADIUS:
        return 0.0
    return float((-(2.0 / 3.0) * z**1.5).real)


def airy_ray_integral(z: complex, tol: float = 1e-11, log_scale: float = 0.0) -> complex:
    """A0(z) = exp(i pi/6) int_z^{z+inf} Ai(exp(i pi/6) t) dt along the real direction.

    The result is multiplied by exp(log_scale), as in :func:`airy_ai`.
    """
    z = complex(z)

    def integrand(s):
        return airy_ai(_ROT * (z + s), log_scale)

    # truncation point: march until the integrand is negligible relative to its peak
    peak = abs(complex(airy_ai(_ROT * z, log_scale)))
    s_end = 1.0
    while True:
        seg = np.linspace(0.0, s_end, 64)
        vals = np.abs(integrand(seg))
        peak = max(peak, vals.max())
        if abs(complex(airy_ai(_ROT * (z + s_end), log_scale))) < 1e-16 * peak and s_end > 2.0:
            break
        s_end *= 1.5
        if s_end > 1e4:
            raise AiryEvalFailure("A0 truncation point not found")
    # break at the turning region and where the evaluator switches method,
    # since the two branches differ at round-off level
    extra = [max(0.0, -z.real)]
    if abs(z.imag) < SERIES_RADIUS:
        h = math.sqrt(SERIES_RADIUS**2 - z.imag**2)
        extra += [-z.real - h, -z.real + h]
    breaks = np.unique(np.concatenate([np.linspace(0.0, s_end, 9), extra]))
    breaks = breaks[(breaks >= 0.0) & (breaks <= s_end)]
    total = 0.0j
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            total += _adaptive_gauss(integrand, a, b, tol, floor=tol * peak)
    return _ROT * total
