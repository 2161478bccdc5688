import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearcouette.evolution import project_moments, run_direct
from nearcouette.nonlinear import (
    ThresholdRun,
    ZeroModeStepper,
    enstrophy,
    enstrophy_audit,
    h2_size,
    initial_profile,
    make_state,
    nonlinear_terms,
    nonlinear_terms_direct,
    physical_grid_size,
    run_dns,
    seeded_state,
    shear_for_kappa,
    stability_boundary,
    threshold_point,
)
from nearcouette.shear import sobolev_norm
from nearcouette.spectral import WavenumberContext, build_grid, moment_weights


def _random_state(grid, kmax, seed, nu=1e-3):
    rng = np.random.default_rng(seed)
    y = grid.y
    modes = {}
    for k in range(1, kmax + 1):
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        modes[k] = project_moments(grid, k, (1 - y**2) * sum(c[j] * y**j for j in range(4)))
    u0 = (1 - y**2) * (rng.normal() + rng.normal() * y)
    return make_state(grid, nu, kmax, modes, u0)


@settings(max_examples=15)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_pseudospectral_products_equal_direct_convolution(kmax, seed):
    g = build_grid(24)
    s = _random_state(g, kmax, seed)
    f1, f2 = nonlinear_terms(s)
    d1, d2 = nonlinear_terms_direct(s)
    scale = max(np.abs(d1).max(), np.abs(d2).max())
    assert np.abs(f1 - d1).max() < 1e-12 * scale
    assert np.abs(f2 - d2).max() < 1e-12 * scale
    # the zero mode of a real product is real
    assert np.abs(f1[0].imag).max() < 1e-12 * scale


@pytest.mark.parametrize("K", [1, 2, 5, 16])
def test_physical_grid_is_alias_free(K):
    m = physical_grid_size(K)
    assert m >= 3 * K + 1 and m % 2 == 0


def test_velocity_is_divergence_free_and_curls_to_vorticity():
    g = build_grid(32)
    s = _random_state(g, 3, 1)
    u1, u2 = s.velocities()
    for k in range(1, 4):
        div = 1j * k * u1[k] + g.D @ u2[k]
        curl = 1j * k * u2[k] - g.D @ u1[k]
        assert np.abs(div).max() < 1e-9 * np.abs(u1[k]).max()
        assert np.abs(curl - s.omega[k]).max() < 1e-9 * np.abs(s.omega[k]).max()
    assert np.allclose(u1[0], s.u0) and np.allclose(s.omega[0], -(g.D @ s.u0))


def test_make_state_rejects_modes_out_of_range():
    g = build_grid(16)
    with pytest.raises(ValueError):
        make_state(g, 1e-3, 2, {3: np.zeros(16)})
    with pytest.raises(ValueError):
        make_state(g, 1e-3, 2, {0: np.zeros(16)})


def test_zero_mode_heat_flow_matches_exact_decay():
    g = build_grid(32)
    nu, T, m = 1e-2, 5.0, 200
    dt = T / m
    u = np.cos(np.pi * g.y / 2)
    stepper = ZeroModeStepper(g, nu, dt)
    zero = np.zeros_like(u)
    prev = None
    for _ in range(m):
        new = stepper.solve(u, zero, *(prev or (None, None)))
        prev = (u, zero)
        u = new
    exact = np.cos(np.pi * g.y / 2) * math.exp(-nu * np.pi**2 / 4 * T)
    assert np.abs(u - exact).max() < 1e-6


def test_linear_dns_equals_single_mode_runs():
    g = build_grid(48)
    nu = 1e-3
    init = shear_for_kappa(g, 0.05)
    s = _random_state(g, 2, 3, nu)
    s.u0[:] = 0
    s.omega[0] = 0
    dt = nu ** (-1 / 3) / 200
    res = run_dns(s, init, 2.0, dt=dt, nonlinear=False, snapshot_modes=(1, 2))
    for k in (1, 2):
        traj, _ = run_direct(s.omega[k], init, 2.0, WavenumberContext(k, nu), g, dt=dt)
        assert np.abs(res.final.omega[k] - traj.final).max() < 1e-12 * np.abs(traj.final).max()
    assert np.all(np.diff(res.energy) >= 0)


def test_tiny_data_dns_tracks_linear_dynamics():
    g = build_grid(48)
    nu = 1e-3
    init = shear_for_kappa(g, 0.05)
    s = seeded_state(g, nu, 3, 1e-8)
    dt = nu ** (-1 / 3) / 200
    res = run_dns(s, init, 5.0, dt=dt)
    traj, _ = run_direct(s.omega[1], init, 5.0, WavenumberContext(1, nu), g, dt=dt)
    assert np.abs(res.final.omega[1] - traj.final).max() < 1e-6 * np.abs(traj.final).max()


def test_zero_data_stays_zero():
    g = build_grid(32)
    s = seeded_state(g, 1e-3, 3, 0.0)
    res = run_dns(s, shear_for_kappa(g, 0.05), 2.0, dt=0.05)
    assert np.abs(res.final.omega).max() == 0.0 and np.abs(res.final.u0).max() == 0.0
    assert np.all(res.energy == 0.0)


def test_inviscid_transport_conserves_enstrophy_to_high_order():
    g = build_grid(32)
    s = _random_state(g, 3, 7)
    drifts = [enstrophy_audit(s, dt, steps=4) for dt in (1e-2, 5e-3)]
    assert drifts[1] < drifts[0] / 3
    assert drifts[1] < 1e-10
    assert enstrophy(s) > 0


def test_initial_data_scaling():
    g = build_grid(64)
    init = shear_for_kappa(g, 0.05)
    assert sobolev_norm(g, init.profile - g.y, 4) == pytest.approx(0.05, rel=1e-6)
    s = seeded_state(g, 1e-3, 4, 3.0)
    assert h2_size(s) == pytest.approx(3.0, rel=1e-12)
    w = initial_profile(g, 1)
    for sign in (1, -1):
        assert abs(moment_weights(g, 1, sign) @ w) < 1e-12 * g.norm(w)


def test_threshold_point_zero_amplitude_is_bounded():
    r = threshold_point(build_grid(16), 1e-3, 0.0, 0.05)
    assert r.verdict == "bounded" and r.sup_energy == 0.0


def test_small_amplitude_threshold_point_is_bounded():
    r = threshold_point(build_grid(32), 1e-2, 1e-3, 0.05, kmax=2, horizon_factor=1)
    assert r.verdict == "bounded" and r.sup_energy <= 10 * r.initial_energy


def _synthetic(nus, grid, c, p):
    return [
        ThresholdRun(nu, a, 0.05, "grew" if a > c * nu**p else "bounded", 0.0, 1.0)
        for nu in nus for a in grid
    ]


@given(st.floats(0.2, 0.6), st.floats(0.5, 50.0))
def test_stability_boundary_recovers_power_law(p, c):
    nus = [1e-3, 3e-4, 1e-4, 3e-5]
    amps = np.geomspace(1e-4, 1e3, 1500)
    fit = stability_boundary(_synthetic(nus, amps, c, p))
    assert fit.slope == pytest.approx(p, abs=0.01)
    assert all(f == 1 for f in fit.flips.values())


def test_stability_boundary_handles_unbracketed_viscosities():
    runs = _synthetic([1e-3, 1e-4], [1.0, 2.0], 1.5, 0.0)
    runs += [ThresholdRun(1e-5, a, 0.05, "bounded", 0.0, 1.0) for a in (1.0, 2.0)]
    fit = stability_boundary(runs)
    assert math.isnan(fit.amplitudes[fit.nus.index(1e-5)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    one = stability_boundary(_synthetic([1e-3], [1.0, 2.0], 1.5, 0.0))
    assert math.isnan(one.slope)
