import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from nearcouette.errors import DegenerateFit
from nearcouette.evolution import (
    EnergyLedger,
    default_dt,
    fit_rate,
    homogeneous_split,
    loglog_slope,
    mode_state,
    passive_component,
    passive_residual_forcing,
    project_moments,
    run_direct,
    run_frozen,
)
from nearcouette.shear import couette, heat_extend, sine_shear
from nearcouette.spectral import WavenumberContext, build_grid, helmholtz_inverse, moment_weights


def _stokes_mode(k):
    """Even no-slip Stokes mode: w = cos(mu y) with mu tan(mu) = -k tanh(k)."""
    mu = brentq(lambda m: m * math.tan(m) + k * math.tanh(k), math.pi / 2 + 1e-9, math.pi - 1e-9)
    return mu


def test_pure_diffusion_matches_stokes_eigenmode():
    k, nu, T = 1.0, 1e-2, 5.0
    g = build_grid(48)
    mu = _stokes_mode(k)
    w0 = np.cos(mu * g.y).astype(complex)
    ctx = WavenumberContext(k, nu)
    traj, _ = run_direct(w0, couette(g), T, ctx, g, dt=T / 500, transport=False)
    exact = w0 * math.exp(-nu * (mu**2 + k**2) * T)
    assert g.norm(traj.final - exact) < 1e-6 * g.norm(exact)


def test_time_stepping_is_second_order():
    k, nu, T = 1.0, 1e-2, 4.0
    g = build_grid(48)
    mu = _stokes_mode(k)
    w0 = np.cos(mu * g.y).astype(complex)
    ctx = WavenumberContext(k, nu)
    exact = w0 * math.exp(-nu * (mu**2 + k**2) * T)
    errs = []
    for m in (20, 40, 80):
        traj, _ = run_direct(w0, couette(g), T, ctx, g, dt=T / m, transport=False)
        errs.append(g.norm(traj.final - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_moments_vanish_along_trajectory():
    g = build_grid(64)
    ctx = WavenumberContext(2.0, 1e-3)
    w0 = project_moments(g, 2.0, (1 - g.y**2) * np.exp(g.y))
    traj, _ = run_direct(w0, sine_shear(g, 0.05), 3.0, ctx, g, record_every=10)
    scale = np.abs(traj.omegas).max()
    for sign in (1, -1):
        assert np.abs(traj.omegas @ moment_weights(g, 2.0, sign)).max() < 1e-10 * scale


@settings(max_examples=10)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.sampled_from([0.5, 1.0, 3.0]))
def test_viscous_flow_without_transport_dissipates_velocity(coefs, k):
    g = build_grid(40)
    ctx = WavenumberContext(k, 1e-2)
    f = sum(c * np.cos((j + 1) * g.y + j) for j, c in enumerate(coefs)) + 0.1
    w0 = project_moments(g, k, f)
    _, led = run_direct(w0, couette(g), 2.0, ctx, g, dt=0.01, transport=False)
    u = np.array(led.velocity_l2)
    assert np.all(np.diff(u) <= 1e-12 * u[0])


def test_run_direct_rejects_incompatible_initial_data():
    g = build_grid(32)
    with pytest.raises(ValueError):
        run_direct(np.ones(32), couette(g), 1.0, WavenumberContext(1.0, 1e-3), g)
    with pytest.raises(ValueError):
        mode_state(WavenumberContext(1.0, 1e-3), g, np.ones(31))


def test_default_dt_divides_the_interval():
    for nu, k in ((1e-3, 1), (1e-4, 4), (1e-5, 0.5)):
        dt = default_dt(nu, k)
        m = nu ** (-1 / 3) / dt
        assert abs(m - round(m)) < 1e-9 and abs(k) * dt <= 0.1 + 1e-12


def test_passive_component_solves_its_transport_equation():
    g = build_grid(32)
    sh = heat_extend(sine_shear(g, 0.05), 1e-3, 0.0)
    k, nu, t, h = 2.0, 1e-3, 3.0, 1e-4
    w0 = (1 - g.y**2) * (1 + g.y)
    dwdt = (passive_component(w0, sh, t + h, k, nu) - passive_component(w0, sh, t - h, k, nu)) / (2 * h)
    w = passive_component(w0, sh, t, k, nu)
    rhs = -1j * k * sh.u * w - nu * k * k * w - sh.du**2 * nu * k * k * t * t * w
    assert np.abs(dwdt - rhs).max() < 1e-6
    with pytest.raises(ValueError):
        passive_component(w0, sh, -1.0, k, nu)


def test_passive_residual_forcing_matches_naive_formula():
    g = build_grid(96)
    sh = heat_extend(sine_shear(g, 0.05), 1e-3, 0.0)
    k, nu, t = 1.0, 1e-3, 2.0
    w0 = project_moments(g, k, (1 - g.y**2) ** 2 * np.exp(-3 * g.y**2))
    w1 = passive_component(w0, sh, t, k, nu)
    phi1 = helmholtz_inverse(g, k, w1)
    naive = nu * (g.D2 @ w1) + sh.du**2 * nu * k * k * t * t * w1 + 1j * k * sh.d2u * phi1
    got = passive_residual_forcing(g, w0, sh, t, k, nu)
    assert g.norm(got - naive) < 1e-8 * g.norm(naive)


def test_split_sums_to_direct_solution():
    g = build_grid(64)
    nu, k = 1e-3, 1.0
    ctx = WavenumberContext(k, nu)
    sh = heat_extend(couette(g), nu, 0.0)
    w0 = project_moments(g, k, (1 - g.y**2) ** 2 * np.exp(-3 * (g.y - 0.2) ** 2))
    dt = nu ** (-1 / 3) / 800
    split = homogeneous_split(w0, sh, 2.0, ctx, g, dt=dt, record_every=50)
    traj, _ = run_direct(w0, sh, 2.0, ctx, g, dt=dt, record_every=50)
    gap = np.abs(split.total - traj.omegas).max() / np.abs(traj.omegas).max()
    assert gap < 1e-4
    assert np.abs(split.moments).max() < 1e-8


def test_frozen_decomposition_reproduces_direct_run():
    g = build_grid(48)
    nu, k = 1e-2, 1.0
    ctx = WavenumberContext(k, nu)
    init = sine_shear(g, 0.05)
    w0 = project_moments(g, k, (1 - g.y**2) * np.exp(g.y))
    dt = nu ** (-1 / 3) / 100
    T = 2.5 * nu ** (-1 / 3)
    sched, led = run_frozen(w0, init, T, ctx, g, dt=dt, record_every=25)
    traj, _ = run_direct(w0, init, T, ctx, g, dt=dt, record_every=25)
    assert sched.n_components() == 3
    assert np.abs(sched.reconstructed - traj.omegas).max() < 1e-4 * np.abs(traj.omegas).max()
    assert led.total_energy > 0 and set(led.x_functionals) == {0, 1, 2}


def test_ledger_rows_and_theorem_energy_are_monotone():
    g = build_grid(48)
    ctx = WavenumberContext(1.0, 1e-3)
    w0 = project_moments(g, 1.0, (1 - g.y**2) * np.exp(g.y))
    _, led = run_direct(w0, couette(g), 5.0, ctx, g)
    E = led.theorem_energy()
    assert np.all(np.diff(E) >= 0)
    rows = list(led.rows())
    assert len(rows) == len(led.times) and rows[-1][-1] == E[-1]
    assert EnergyLedger(ctx).theorem_energy().size == 0


def test_fit_rate_recovers_exponential_decay():
    t = np.linspace(0, 10, 50)
    rate, r2 = fit_rate(t, 3 * np.exp(-0.7 * t))
    assert rate == pytest.approx(0.7) and r2 == pytest.approx(1.0)
    assert fit_rate(t, np.exp(-0.7 * t), window=(2, 8))[0] == pytest.approx(0.7)
    with pytest.raises(DegenerateFit):
        fit_rate(t, np.ones_like(t))
    with pytest.raises(DegenerateFit):
        fit_rate(t[:2], np.exp(-t[:2]))
    with pytest.raises(DegenerateFit):
        fit_rate(t, -np.exp(-t))


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_loglog_slope_is_exact_on_power_laws(p, c):
    x = np.geomspace(1e-5, 1e-2, 6)
    slope, res = loglog_slope(x, c * x**p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert np.abs(res).max() < 1e-9
