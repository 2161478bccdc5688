"""Run outputs: CSV tables, binary snapshots with text sidecars, and static plots.

Numbers are written with 17 significant digits so identical runs give
identical files.  Plots are produced from the CSV files, never from live
objects, with the non-interactive Agg backend.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

RESOLVENT_COLUMNS = ("nu", "k", "lambda_r", "lambda_i", "ratio_name", "value", "grid_n")
THRESHOLD_COLUMNS = ("nu", "amplitude", "kappa", "verdict", "sup_energy")
LEDGER_COLUMNS = ("t", "omega_l2", "rho_weighted_l2", "z_norm_sq", "velocity_l2", "wall_weighted_l2", "energy")

# one CSV per probe family; names are matched by prefix
RESOLVENT_PROBES = {
    "navier": ("nav_", "imbalance"),
    "coefficients": ("coef_",),
    "correctors": ("corrector_", "evans_"),
}


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def resolvent_rows(points, prefixes=None):
    for p in points:
        if p.status != "ok":
            continue
        for name, value in p.ratios.items():
            if prefixes is None or name.startswith(tuple(prefixes)):
                yield (p.nu, p.k, p.lam.real, p.lam.imag, name, value, p.grid_n)


def write_resolvent_csvs(out_dir, points) -> list[Path]:
    """One file per probe family, plus the path gap and point status."""
    out = Path(out_dir)
    files = [
        write_csv(out / f"resolvent_{family}.csv", RESOLVENT_COLUMNS, resolvent_rows(points, prefixes))
        for family, prefixes in RESOLVENT_PROBES.items()
    ]
    gap_rows = ((p.nu, p.k, p.lam.real, p.lam.imag, "path_gap", p.path_gap, p.grid_n) for p in points if p.status == "ok")
    files.append(write_csv(out / "resolvent_path_gap.csv", RESOLVENT_COLUMNS, gap_rows))
    files.append(write_csv(
        out / "resolvent_status.csv",
        ("nu", "k", "lambda_r", "lambda_i", "status", "message", "grid_n"),
        ((p.nu, p.k, p.lam.real, p.lam.imag, p.status, p.message, p.grid_n) for p in points),
    ))
    return files


def write_threshold_csv(path, runs) -> Path:
    return write_csv(path, THRESHOLD_COLUMNS, ((r.nu, r.amplitude, r.kappa, r.verdict, r.sup_energy) for r in runs))


def write_ledger_csv(path, ledger) -> Path:
    return write_csv(path, LEDGER_COLUMNS, ledger.rows())


def write_snapshots(stem, times, data, **meta) -> list[Path]:
    """Little-endian float64, row-major; complex data gets a trailing axis (re, im).

    The sidecar ``<stem>.txt`` holds ``key: value`` lines with the shape,
    layout and the times.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(data)
    is_complex = np.iscomplexobj(arr)
    if is_complex:
        arr = np.stack([arr.real, arr.imag], axis=-1)
    arr = np.ascontiguousarray(arr, dtype="<f8")
    bin_path = stem.with_suffix(".bin")
    arr.tofile(bin_path)
    lines = [
        "format: float64 little-endian row-major",
        f"shape: {' '.join(str(s) for s in arr.shape)}",
        f"complex: {'true' if is_complex else 'false'}",
    ]
    lines += [f"{key}: {fmt(v)}" for key, v in sorted(meta.items())]
    lines.append("times: " + " ".join(fmt(t) for t in times))
    side = stem.with_suffix(".txt")
    side.write_text("\n".join(lines) + "\n")
    return [bin_path, side]


def read_snapshots(stem) -> tuple[np.ndarray, np.ndarray, dict]:
    stem = Path(stem)
    meta = {}
    for line in stem.with_suffix(".txt").read_text().splitlines():
        key, _, value = line.partition(": ")
        meta[key] = value
    shape = tuple(int(s) for s in meta["shape"].split())
    arr = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(shape)
    if meta["complex"] == "true":
        arr = arr[..., 0] + 1j * arr[..., 1]
    times = np.array([float(t) for t in meta["times"].split()])
    return times, arr, meta


# ---------------------------------------------------------------- plots


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "font.size": 9,
        "axes.labelsize": 9,
        "legend.fontsize": 8,
        "figure.figsize": (5.0, 3.4),
        "figure.dpi": 120,
        "lines.linewidth": 1.2,
        "lines.markersize": 3,
    })
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_resolvent(csv_path, png_path) -> Path:
    """Each ratio against lambda_r, one panel line per (nu, k, lambda_i)."""
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots()
    groups: dict = {}
    for r in rows:
        key = (r["ratio_name"], r["nu"], r["k"], r["lambda_i"])
        groups.setdefault(key, []).append((float(r["lambda_r"]), float(r["value"])))
    for (name, nu, k, li), pts in sorted(groups.items()):
        pts.sort()
        x, y = zip(*pts)
        ax.semilogy(x, np.abs(y), label=f"{name} nu={float(nu):.0e} k={k}")
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("ratio")
    if len(groups) <= 12:
        ax.legend(loc="best")
    return _save(fig, png_path)


def plot_ledger(csv_path, png_path, title: str = "") -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    t = np.array([float(r["t"]) for r in rows])
    fig, ax = plt.subplots()
    for col in ("omega_l2", "velocity_l2", "energy"):
        ax.semilogy(t, np.maximum([float(r[col]) for r in rows], 1e-300), label=col)
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend(loc="best")
    return _save(fig, png_path)


def plot_series(png_path, t, series: dict, xlabel="t", ylabel="", logy=True, title="") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    for name, y in series.items():
        y = np.asarray(y, dtype=float)
        (ax.semilogy if logy else ax.plot)(t, np.maximum(y, 1e-300) if logy else y, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best")
    return _save(fig, png_path)


def plot_loglog_fit(png_path, x, y, slope: float, intercept: float, xlabel: str, ylabel: str, reference=None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    x, y = np.asarray(x, float), np.asarray(y, float)
    ax.loglog(x, y, "o", label="measured")
    xs = np.geomspace(x.min(), x.max(), 50)
    ax.loglog(xs, np.exp(intercept) * xs**slope, "-", label=f"fit slope {slope:.3f}")
    if reference is not None:
        ax.loglog(xs, y[0] * (xs / x[0]) ** reference, ":", label=f"slope {reference:g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best")
    return _save(fig, png_path)


def plot_threshold(csv_path, png_path) -> Path:
    """Verdict map on log-log axes."""
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots()
    for verdict, marker in (("bounded", "o"), ("grew", "x")):
        pts = [(float(r["nu"]), float(r["amplitude"])) for r in rows if r["verdict"] == verdict and float(r["amplitude"]) > 0]
        if pts:
            nu, a = zip(*pts)
            ax.loglog(nu, a, marker, linestyle="none", label=verdict)
    ax.set_xlabel("nu")
    ax.set_ylabel("amplitude")
    ax.legend(loc="best")
    return _save(fig, png_path)
