import math

import numpy as np
import pytest

from nearcouette.shear import (
    ShearModel,
    couette,
    drift_probe,
    frozen_shear,
    frozen_time,
    heat_extend,
    is_compatible,
    make_initial_shear,
    parse_shear_spec,
    sine_shear,
    sobolev_norm,
    tabulated_shear,
)
from nearcouette.spectral import build_grid


def _sine_h4(a):
    return a * math.sqrt(sum(np.pi ** (2 * j) for j in range(5)))


def test_couette_has_zero_kappa():
    g = build_grid(32)
    assert couette(g).kappa == pytest.approx(0.0, abs=1e-13)


def test_sine_kappa_is_h4_size_of_perturbation():
    g = build_grid(96)
    sh = sine_shear(g, 0.05)
    assert sh.kappa == pytest.approx(_sine_h4(0.05), rel=1e-8)
    assert sobolev_norm(g, sh.perturbation, 4) == pytest.approx(sh.kappa)


def test_heat_extension_of_sine_shear_is_exponential_decay():
    g = build_grid(64)
    a, nu, t = 0.05, 1e-3, 37.0
    prof = heat_extend(sine_shear(g, a), nu, t)
    decay = a * math.exp(-nu * np.pi**2 * t)
    assert np.abs(prof.u - (g.y + decay * np.sin(np.pi * g.y))).max() < 1e-12
    assert np.abs(prof.du - (1 + decay * np.pi * np.cos(np.pi * g.y))).max() < 1e-9
    assert np.abs(prof.d2u + decay * np.pi**2 * np.sin(np.pi * g.y)).max() < 1e-7


def test_wall_values_and_slopes():
    g = build_grid(64)
    prof = heat_extend(sine_shear(g, 0.05), 1e-3, 0.0)
    U, dU = prof.at_wall(1)
    assert U == pytest.approx(1.0)
    assert dU == pytest.approx(1 - 0.05 * np.pi, rel=1e-10)


def test_model_matches_direct_extension_and_frozen_times():
    g = build_grid(48)
    init = sine_shear(g, 0.02)
    m = ShearModel(init, 1e-3)
    assert np.allclose(m.at(5.0).u, heat_extend(init, 1e-3, 5.0).u)
    assert frozen_time(1e-3, 2) == pytest.approx(20.0)
    assert np.allclose(m.frozen(2).u, frozen_shear(init, 1e-3, 2).u)
    with pytest.raises(ValueError):
        frozen_shear(init, 1e-3, -1)


def test_drift_is_bounded_by_kappa_and_time_gap():
    g = build_grid(64)
    rep = drift_probe(sine_shear(g, 0.05), 1e-3, 0.0, 10.0)
    assert 0 < rep.constant < 1.0
    assert drift_probe(couette(g), 1e-3, 0.0, 10.0).constant == 0.0


def test_compatibility_of_sine_and_incompatible_profile():
    g = build_grid(64)
    assert is_compatible(sine_shear(g, 0.05))
    bad = make_initial_shear(g, g.y + 0.05 * (1 - g.y**2))
    assert not is_compatible(bad)


def test_spec_parsing(tmp_path):
    g = build_grid(32)
    assert parse_shear_spec(g, "couette").kappa == pytest.approx(0.0, abs=1e-13)
    assert parse_shear_spec(g, "sine(0.01)").kappa == pytest.approx(_sine_h4(0.01), rel=1e-6)
    table = tmp_path / "u.txt"
    ys = np.linspace(-1, 1, 201)
    np.savetxt(table, np.column_stack([ys, ys + 0.01 * np.sin(np.pi * ys)]))
    tab = parse_shear_spec(g, "u.txt", base_dir=tmp_path)
    assert np.abs(tab.profile - (g.y + 0.01 * np.sin(np.pi * g.y))).max() < 1e-6
    assert np.allclose(tabulated_shear(g, table).profile, tab.profile)
    with pytest.raises(ValueError):
        parse_shear_spec(g, "parabola")
