"""Run configuration: TOML text to a validated :class:`RunConfig`.

The grammar is TOML (top-level keys plus ``[lambda]``, ``[threshold]``,
``[evolution]`` and ``[tolerances]`` tables); see the README for every key.
All problems found during validation are reported together.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
from pathlib import Path
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import NearCouetteError

EXPERIMENTS = (
    "operator-check",
    "resolvent-sweep",
    "evolve",
    "frozen-compare",
    "homogeneous-split",
    "dns-threshold",
    "rate-fit",
)

# fields each experiment cannot run without
REQUIRED = {
    "operator-check": ("k",),
    "resolvent-sweep": ("nu", "k"),
    "evolve": ("nu", "k"),
    "frozen-compare": ("nu", "k"),
    "homogeneous-split": ("nu", "k"),
    "dns-threshold": ("nu", "amplitudes"),
    "rate-fit": ("nu", "k"),
}

DEFAULT_TOLERANCES = {
    "identity": 1e-9,  # antisymmetry / conjugation / realness
    "commutator_ratio": 4.0,  # required shrink of the commutator residual per doubling
    "path_gap": 1e-6,  # decomposition vs monolithic no-slip solve
    "evans_ratio": math.sqrt(2.0) / 2.0 + 1e-3,
    "evans_margin": 0.5 * (1.0 - 1e-3),
    "frozen_gap": 1e-4,
    "frozen_gap_couette": 1e-8,
    "split_gap": 1e-5,
    "split_moments": 1e-7,
    "moment_drift": 1e-8,
    "slope_min": 0.25,
    "slope_max": 0.41,
}


class ParseError(NearCouetteError):
    """Malformed configuration text."""

    def __init__(self, message: str, line: int | None = None, context: str | None = None):
        self.line, self.context = line, context
        where = f" (line {line}: {context!r})" if line is not None else ""
        super().__init__(message + where)


class ValidationError(NearCouetteError):
    """Every problem found in a parsed configuration."""

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.issues))


@dataclass(frozen=True)
class LambdaSweep:
    n_real: int = 81
    real_range: tuple = (-2.0, 2.0)
    deltas: tuple = (0.0, 0.1)
    delta0: float = 0.1  # high-frequency constant for the Navier probes
    spot_checks: int = 10  # points used by the grid-doubling check


@dataclass(frozen=True)
class ThresholdSpec:
    kappa: float = 0.05
    horizon_factor: float = 10.0
    growth_factor: float = 10.0
    kmax: int = 4


@dataclass(frozen=True)
class EvolutionSpec:
    horizon: float = 4.0  # final time in units of nu^(-1/3)
    steps_per_interval: int | None = None  # time steps per nu^(-1/3); default from transport
    zeta: float = 0.01
    fit_window: tuple = (2.0, 6.0)  # rate-fit window in units of nu^(-1/3)
    init: str = "bump"  # initial vorticity profile name


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    grid_n: int = 128
    nu: tuple = ()
    k: tuple = ()
    shear: str = "sine(0.05)"
    amplitudes: tuple = ()
    samples: int = 100  # random fields for operator identities
    seed: int = 0
    output_dir: str = "runs"
    lambdas: LambdaSweep = field(default_factory=LambdaSweep)
    threshold: ThresholdSpec = field(default_factory=ThresholdSpec)
    evolution: EvolutionSpec = field(default_factory=EvolutionSpec)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def with_overrides(self, **changes) -> "RunConfig":
        data = asdict(self)
        data.update(changes)
        return _from_plain(data)

    def canonical(self) -> str:
        """Deterministic text form used for hashing."""
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), default=list)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _from_plain(data: dict) -> RunConfig:
    data = dict(data)
    data["lambdas"] = LambdaSweep(**data["lambdas"]) if isinstance(data["lambdas"], dict) else data["lambdas"]
    data["threshold"] = ThresholdSpec(**data["threshold"]) if isinstance(data["threshold"], dict) else data["threshold"]
    data["evolution"] = EvolutionSpec(**data["evolution"]) if isinstance(data["evolution"], dict) else data["evolution"]
    return RunConfig(**data)


_TOP = {"experiment", "grid_n", "nu", "k", "shear", "amplitudes", "samples", "seed", "output_dir"}
_TABLES = {"lambda": LambdaSweep, "threshold": ThresholdSpec, "evolution": EvolutionSpec}


def _line_of(text: str, message: str) -> tuple[int | None, str | None]:
    m = re.search(r"line (\d+)", message)
    if not m:
        return None, None
    line = int(m.group(1))
    lines = text.splitlines()
    return line, lines[line - 1].strip() if 0 < line <= len(lines) else None


_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_.-]+)\s*\]\s*(#.*)?$")
_ASSIGN = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")


def _duplicate_key(text: str):
    """(line, key) of the first repeated plain key within one table, if any.

    The TOML reader rejects these too, but reports the end of the document.
    """
    seen: set = set()
    table = ""
    for i, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            table = m.group(1)
            continue
        m = _ASSIGN.match(line)
        if m:
            key = (table, m.group(1))
            if key in seen:
                return i, ".".join(filter(None, key))
            seen.add(key)
    return None


def parse_text(text: str, experiment: str | None = None, base_dir=None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        dup = _duplicate_key(text)
        if dup is not None:
            line, key = dup
            raise ParseError(f"duplicate key {key!r}", line, text.splitlines()[line - 1].strip()) from None
        msg = str(exc)
        line, ctx = _line_of(text, msg)
        raise ParseError(msg if line is None else msg.split(" (at")[0], line, ctx) from None
    return validate(raw, experiment, base_dir)


def parse_config(path, experiment: str | None = None) -> RunConfig:
    """Read and validate a configuration file.

    ``experiment`` (from the command line) overrides or supplies the
    ``experiment`` key.
    """
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"config file not found: {p}")
    return parse_text(p.read_text(), experiment, p.parent)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _num_list(raw, name, issues, positive=True, integer=False):
    if raw is None:
        return ()
    vals = raw if isinstance(raw, list) else [raw]
    out = []
    for v in vals:
        if not _is_num(v) or (integer and int(v) != v):
            issues.append(f"{name}: expected {'integer' if integer else 'number'}s, got {v!r}")
            continue
        if positive and not v > 0:
            issues.append(f"{name}: values must be positive, got {v!r}")
            continue
        out.append(int(v) if integer else float(v))
    return tuple(out)


def _table(raw: dict, name: str, cls, issues: list[str]):
    section = raw.get(name, {})
    if not isinstance(section, dict):
        issues.append(f"{name}: expected a table")
        return cls()
    defaults = cls()
    known = set(asdict(defaults))
    values = {}
    for key, v in section.items():
        if key not in known:
            issues.append(f"{name}.{key}: unknown key")
            continue
        ref = getattr(defaults, key)
        full = f"{name}.{key}"
        if isinstance(ref, tuple):
            if not isinstance(v, list) or not all(_is_num(x) for x in v):
                issues.append(f"{full}: expected an array of numbers")
                continue
            values[key] = tuple(float(x) for x in v)
        elif isinstance(ref, str):
            if not isinstance(v, str):
                issues.append(f"{full}: expected a string")
                continue
            values[key] = v
        else:
            integer = isinstance(ref, int) or key == "steps_per_interval"
            if not _is_num(v) or (integer and int(v) != v):
                issues.append(f"{full}: expected {'an integer' if integer else 'a number'}, got {v!r}")
                continue
            values[key] = int(v) if integer else float(v)
    return cls(**{**asdict(defaults), **values})


def _resolve_shear(spec: str, base_dir, issues: list[str]) -> str:
    """Check the shear spec on a small grid; table paths become absolute."""
    from .shear import parse_shear_spec
    from .spectral import build_grid

    spec = spec.strip()
    if spec != "couette" and not spec.startswith("sine("):
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        spec = str(path.resolve())
    try:
        parse_shear_spec(build_grid(16), spec)
    except (ValueError, OSError) as exc:
        issues.append(f"shear: {exc}")
    return spec


def validate(raw: dict, experiment: str | None = None, base_dir=None) -> RunConfig:
    issues: list[str] = []
    for key in raw:
        if key not in _TOP and key not in _TABLES and key != "tolerances":
            issues.append(f"{key}: unknown key")
    exp = experiment or raw.get("experiment")
    if exp is None:
        issues.append("experiment: missing")
    elif exp not in EXPERIMENTS:
        issues.append(f"experiment: unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")

    grid_n = raw.get("grid_n", 128)
    if not _is_num(grid_n) or int(grid_n) != grid_n or grid_n < 16:
        issues.append(f"grid_n: expected an integer >= 16, got {grid_n!r}")
        grid_n = 128
    nu = _num_list(raw.get("nu"), "nu", issues)
    if any(v >= 1 for v in nu):
        issues.append("nu: values must be below 1")
    k = _num_list(raw.get("k"), "k", issues, integer=True)
    amplitudes = _num_list(raw.get("amplitudes"), "amplitudes", issues, positive=False)
    if any(a < 0 for a in amplitudes):
        issues.append("amplitudes: values must be non-negative")
    shear = raw.get("shear", "sine(0.05)")
    if not isinstance(shear, str):
        issues.append("shear: expected a string such as 'couette', 'sine(0.05)' or 'table(path)'")
        shear = "sine(0.05)"
    samples = raw.get("samples", 100)
    if not _is_num(samples) or int(samples) != samples or samples < 1:
        issues.append(f"samples: expected a positive integer, got {samples!r}")
        samples = 100
    seed = raw.get("seed", 0)
    if not _is_num(seed) or int(seed) != seed or seed < 0:
        issues.append(f"seed: expected a non-negative integer, got {seed!r}")
        seed = 0
    out = raw.get("output_dir", "runs")
    if not isinstance(out, str):
        issues.append("output_dir: expected a string")
        out = "runs"

    tables = {name: _table(raw, name, cls, issues) for name, cls in _TABLES.items()}
    lam, thr, evo = tables["lambda"], tables["threshold"], tables["evolution"]
    if lam.n_real < 2:
        issues.append("lambda.n_real: need at least 2 points")
    if len(lam.real_range) != 2 or lam.real_range[0] >= lam.real_range[1]:
        issues.append("lambda.real_range: expected [low, high] with low < high")
    if any(d < 0 for d in lam.deltas):
        issues.append("lambda.deltas: values must be non-negative")
    if not lam.delta0 > 0:
        issues.append("lambda.delta0: must be positive")
    elif any(d > lam.delta0 for d in lam.deltas):
        # sweep points must satisfy k Im(lambda) >= -delta0 nu^(1/3) |k|^(2/3)
        issues.append(f"lambda.deltas: values must not exceed delta0 = {lam.delta0:g}")
    for name in ("horizon_factor", "growth_factor", "kmax"):
        if not getattr(thr, name) > 0:
            issues.append(f"threshold.{name}: must be positive")
    if thr.kappa < 0:
        issues.append("threshold.kappa: must be non-negative")
    if not evo.horizon > 0:
        issues.append("evolution.horizon: must be positive")
    if evo.steps_per_interval is not None and evo.steps_per_interval < 1:
        issues.append("evolution.steps_per_interval: must be a positive integer")
    if not evo.zeta > 0:
        issues.append("evolution.zeta: must be positive")
    if len(evo.fit_window) != 2 or not 0 <= evo.fit_window[0] < evo.fit_window[1]:
        issues.append("evolution.fit_window: expected [start, end] with 0 <= start < end")
    if evo.init not in ("bump", "smooth"):
        issues.append(f"evolution.init: unknown profile {evo.init!r}; choose 'bump' or 'smooth'")

    tol = dict(DEFAULT_TOLERANCES)
    t_raw = raw.get("tolerances", {})
    if not isinstance(t_raw, dict):
        issues.append("tolerances: expected a table")
        t_raw = {}
    for key, v in t_raw.items():
        if key not in DEFAULT_TOLERANCES:
            issues.append(f"tolerances.{key}: unknown key")
        elif not _is_num(v) or not v > 0:
            issues.append(f"tolerances.{key}: must be a positive number")
        else:
            tol[key] = float(v)

    if exp in REQUIRED:
        present = {"nu": nu, "k": k, "amplitudes": amplitudes}
        for name in REQUIRED[exp]:
            if not present[name]:
                issues.append(f"{name}: required by {exp}")
    if exp in ("evolve", "frozen-compare", "homogeneous-split", "rate-fit") and len(k) > 1:
        issues.append(f"k: {exp} takes a single wavenumber")
    if exp == "rate-fit" and len(nu) < 2:
        issues.append("nu: rate-fit needs at least two values")

    if not issues:
        shear = _resolve_shear(shear, base_dir, issues)
    if issues:
        raise ValidationError(issues)
    return RunConfig(
        experiment=exp, grid_n=int(grid_n), nu=nu, k=k, shear=shear, amplitudes=amplitudes,
        samples=int(samples), seed=int(seed), output_dir=out, lambdas=lam, threshold=thr,
        evolution=evo, tolerances=tol,
    )
