import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearcouette.report import (
    LEDGER_COLUMNS,
    THRESHOLD_COLUMNS,
    fmt,
    plot_ledger,
    plot_resolvent,
    plot_threshold,
    read_csv,
    read_snapshots,
    write_csv,
    write_ledger_csv,
    write_resolvent_csvs,
    write_snapshots,
    write_threshold_csv,
)
from nearcouette.evolution import EnergyLedger
from nearcouette.nonlinear import ThresholdRun
from nearcouette.resolvent import SweepPoint
from nearcouette.spectral import WavenumberContext, build_grid


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(fmt(x)) == x


def test_fmt_types():
    assert fmt(True) == "true" and fmt(np.int64(3)) == "3" and fmt("a") == "a"


@settings(max_examples=10)
@given(st.sampled_from([(3,), (2, 5), (4, 3, 2)]), st.booleans(), st.integers(0, 1000))
def test_snapshots_round_trip(tmp_path_factory, shape, cplx, seed):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=shape)
    if cplx:
        data = data + 1j * rng.normal(size=shape)
    times = np.linspace(0, 1, shape[0])
    stem = tmp_path_factory.mktemp("s") / "snap"
    files = write_snapshots(stem, times, data, nu=1e-3, k=1)
    assert [f.suffix for f in files] == [".bin", ".txt"]
    t, arr, meta = read_snapshots(stem)
    assert np.array_equal(arr, data) and np.array_equal(t, times)
    assert meta["nu"] == "0.001" and meta["complex"] == ("true" if cplx else "false")
    assert files[0].stat().st_size == data.size * 8 * (2 if cplx else 1)


def test_threshold_and_ledger_csvs(tmp_path):
    runs = [ThresholdRun(1e-3, 2.0, 0.05, "bounded", 1.5, 1.0), ThresholdRun(1e-3, 4.0, 0.05, "grew", 30.0, 1.0)]
    p = write_threshold_csv(tmp_path / "t.csv", runs)
    rows = read_csv(p)
    assert tuple(rows[0]) == THRESHOLD_COLUMNS and rows[1]["verdict"] == "grew"
    plot_threshold(p, tmp_path / "t.png")
    g = build_grid(16)
    led = EnergyLedger(WavenumberContext(1.0, 1e-3))
    w = (1 - g.y**2).astype(complex)
    for t in (0.0, 1.0):
        led.record(g, t, w, w)
    q = write_ledger_csv(tmp_path / "l.csv", led)
    assert tuple(read_csv(q)[0]) == LEDGER_COLUMNS
    plot_ledger(q, tmp_path / "l.png")
    assert (tmp_path / "t.png").stat().st_size > 0 and (tmp_path / "l.png").stat().st_size > 0


def test_resolvent_csvs_split_by_family(tmp_path):
    pts = [
        SweepPoint(1e-3, 1, 0.1 + 0j, 64, "ok", 1e-12, {"nav_a": 1.0, "coef_b": 2.0, "evans_c": 3.0, "other": 9.0}),
        SweepPoint(1e-3, 1, 0.2 + 0j, 64, "ill-conditioned", float("nan"), {}, "boom"),
    ]
    files = write_resolvent_csvs(tmp_path, pts)
    names = {f.name for f in files}
    assert {"resolvent_navier.csv", "resolvent_coefficients.csv", "resolvent_correctors.csv",
            "resolvent_path_gap.csv", "resolvent_status.csv"} == names
    assert [r["ratio_name"] for r in read_csv(tmp_path / "resolvent_correctors.csv")] == ["evans_c"]
    assert [r["status"] for r in read_csv(tmp_path / "resolvent_status.csv")] == ["ok", "ill-conditioned"]
    plot_resolvent(tmp_path / "resolvent_navier.csv", tmp_path / "r.png")


def test_write_csv_is_deterministic(tmp_path):
    rows = [(0.1, 1, "x"), (1 / 3, 2, "y")]
    a = write_csv(tmp_path / "a.csv", ("a", "b", "c"), rows).read_bytes()
    b = write_csv(tmp_path / "b.csv", ("a", "b", "c"), rows).read_bytes()
    assert a == b and b"0.33333333333333331" in a
