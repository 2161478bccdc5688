import numpy as np
import pytest
from scipy.integrate import solve_bvp

from nearcouette.resolvent import (
    ResolventProblem,
    airy_correctors,
    airy_ode_residual,
    assemble_noslip,
    build_correctors,
    corrector_scales,
    default_forcing,
    evaluate_point,
    forcing_norms,
    high_freq_probe,
    imbalance_probe,
    resolvent_sweep,
    solve_navier,
    solve_noslip_direct,
    sweep_lambdas,
    wall_slope,
)
from nearcouette.shear import heat_extend, sine_shear
from nearcouette.spectral import WavenumberContext, build_grid, moment_weights

A = 0.05


def _problem(n=128, nu=2e-2, k=1.0, lam=0.3 - 0.05j, cls="H1_0"):
    g = build_grid(n)
    shear = heat_extend(sine_shear(g, A), nu, 0.0)
    return ResolventProblem(WavenumberContext(k, nu), g, shear, lam, default_forcing(g), cls)


def _bvp_reference(nu, k, lam, noslip):
    """Independent solve of the fourth-order system with scipy's collocation BVP solver."""
    U = lambda y: y + A * np.sin(np.pi * y)
    U2 = lambda y: -A * np.pi**2 * np.sin(np.pi * y)
    F = lambda y: (1 - y**2) * (1 + 0.5 * y + 0.25j * y**2)

    def rhs(y, s):
        phi, dphi, w, dw = s[0] + 1j * s[4], s[1] + 1j * s[5], s[2] + 1j * s[6], s[3] + 1j * s[7]
        d2phi = w + k * k * phi
        d2w = ((nu * k * k + 1j * k * (U(y) - lam)) * w - 1j * k * U2(y) * phi - F(y)) / nu
        out = [dphi, d2phi, dw, d2w]
        return np.vstack([o.real for o in out] + [o.imag for o in out])

    def bc(a, b):
        if noslip:
            idx = [0, 1]
        else:
            idx = [0, 2]
        rows = []
        for i in idx:
            rows += [a[i], b[i], a[i + 4], b[i + 4]]
        return np.array(rows)

    y = np.linspace(-1, 1, 801)
    sol = solve_bvp(rhs, bc, y, np.zeros((8, y.size)), tol=1e-8, max_nodes=500000)
    assert sol.success
    return lambda t: sol.sol(t)[2] + 1j * sol.sol(t)[6]


def test_navier_solution_matches_independent_bvp_solver():
    p = _problem()
    nav = solve_navier(p)
    ref = _bvp_reference(2e-2, 1.0, p.lam, noslip=False)(p.grid.y)
    assert np.abs(nav.w_na - ref).max() < 1e-6 * np.abs(ref).max()
    assert nav.residual < 1e-8


def test_noslip_solution_matches_independent_bvp_solver():
    p = _problem()
    ref = _bvp_reference(2e-2, 1.0, p.lam, noslip=True)(p.grid.y)
    w = solve_noslip_direct(p)
    assert np.abs(w - ref).max() < 1e-5 * np.abs(ref).max()


def test_decomposition_path_agrees_with_direct_solve_and_meets_moments():
    p = _problem(n=192, nu=1e-4, lam=0.2 - 0.01j)
    sol = assemble_noslip(p)
    assert sol.path_gap < 1e-8
    for sign in (1, -1):
        m = moment_weights(p.grid, p.k, sign) @ sol.w
        assert abs(m) < 1e-8 * p.grid.norm(sol.w)


def test_airy_correctors_solve_their_wall_equation():
    p = _problem(n=256, nu=1e-5, lam=0.5 - 0.02j)
    pair = airy_correctors(p)
    for sign, W in ((1, pair.w_ap_plus), (-1, pair.w_ap_minus)):
        res = airy_ode_residual(p, W, sign)
        assert p.grid.norm(res) < 1e-6 * p.grid.norm(p.nu * (p.grid.D2 @ W))
    L, d = corrector_scales(p, 1)
    assert L == pytest.approx(((1 - np.pi * A) / 1e-5) ** (1 / 3))


def test_evans_combination_has_unit_wall_slopes():
    p = _problem(n=256, nu=1e-5, lam=-0.4 - 0.02j)
    pair = build_correctors(p)
    assert wall_slope(p.grid, p.k, pair.w_plus, 1) == pytest.approx(1.0, abs=1e-8)
    assert wall_slope(p.grid, p.k, pair.w_plus, -1) == pytest.approx(0.0, abs=1e-8)
    assert wall_slope(p.grid, p.k, pair.w_minus, -1) == pytest.approx(1.0, abs=1e-8)
    c = pair.coeffs
    assert c.ratio_minus < np.sqrt(2) / 2
    assert c.evans_margin > 0.5


def test_problem_validation():
    g = build_grid(32)
    sh = heat_extend(sine_shear(g, A), 1e-3, 0.0)
    ctx = WavenumberContext(1, 1e-3)
    with pytest.raises(ValueError):
        ResolventProblem(ctx, g, sh, 0.1, np.ones(32), "weird")
    with pytest.raises(ValueError):
        ResolventProblem(ctx, g, sh, 0.1, np.ones(32), "H1_0")
    with pytest.raises(ValueError):
        ResolventProblem(ctx, g, sh, 0.1, np.ones(31))


def test_forcing_norm_relations():
    p = _problem(n=96)
    norms = forcing_norms(p)
    assert norms["L2"] == pytest.approx(p.grid.norm(p.forcing))
    # ||F||_{H^-1} <= ||F|| / |k| for Dirichlet test functions
    assert norms["Hminus1"] <= norms["L2"] / abs(p.k) + 1e-14
    assert norms["H1"] >= norms["L2"]
    assert imbalance_probe(p) > 0


def test_high_frequency_probe_requires_large_k():
    with pytest.raises(ValueError):
        high_freq_probe(_problem(n=64, nu=1e-3, k=1.0))
    q = high_freq_probe(_problem(n=96, nu=1e-2, k=12.0))
    assert all(np.isfinite(q)) and max(q) < 10


def test_sweep_lambdas_layout():
    lams = sweep_lambdas(1e-3, 8, n_real=5, deltas=(0.0, 0.1))
    assert len(lams) == 10
    assert lams[0] == pytest.approx(-2.0)
    assert lams[5].imag == pytest.approx(-0.1 * 1e-3 ** (1 / 3) * 8 ** (-1 / 3))


def test_sweep_keeps_order_and_reports_status():
    g = build_grid(96)
    sh = heat_extend(sine_shear(g, A), 1e-3, 0.0)
    pts = resolvent_sweep(g, sh, [1e-3], [1], lambdas_for=lambda nu, k: [0.1, -0.5 - 0.01j])
    assert [p.lam for p in pts] == [0.1, -0.5 - 0.01j]
    assert all(p.status == "ok" for p in pts)
    single = evaluate_point(g, sh, 1e-3, 1, 0.1)
    assert single.ratios == pts[0].ratios
