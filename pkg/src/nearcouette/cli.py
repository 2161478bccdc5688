"""Command line: ``nearcouette <experiment> --config <path> [--out DIR] [--threads N] [--seed S]``.

Exit status: 0 when every check passes, 1 when a check fails or the
experiment raises, 2 on usage or configuration errors.  The run directory
always receives a copy of the config, a manifest and a summary.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import datetime as _dt
import hashlib
import json
import logging
from pathlib import Path
import sys
import traceback

from .config import EXPERIMENTS, ParseError, RunConfig, ValidationError, parse_config
from .errors import NearCouetteError

log = logging.getLogger("nearcouette")

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class _SerialPool:
    def map(self, fn, items):
        return map(fn, items)


@dataclass
class RunRecord:
    config_hash: str
    experiment: str
    started: str
    finished: str = ""
    manifest: list = field(default_factory=list)  # (relative path, bytes, sha256)
    summary: list = field(default_factory=list)  # (check name, passed, value, tolerance, detail)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and bool(self.summary) and all(s[1] for s in self.summary)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_directory(cfg: RunConfig, out: str | Path | None) -> Path:
    base = Path(out if out is not None else cfg.output_dir)
    return base / f"{cfg.experiment}-{cfg.config_hash()}"


def _close(record: RunRecord, run_dir: Path, files) -> RunRecord:
    record.finished = _now()
    summary = run_dir / "summary.txt"
    lines = [f"experiment: {record.experiment}", f"config hash: {record.config_hash}"]
    for name, ok, value, tol, detail in record.summary:
        mark = "PASS" if ok else "FAIL"
        t = "" if tol is None else f" (tolerance {tol:.3g})"
        lines.append(f"[{mark}] {name}: {value:.6g}{t}" + (f"  {detail}" if detail else ""))
    if record.error:
        lines.append(f"[FAIL] error: {record.error}")
    lines.append(f"overall: {'PASS' if record.passed else 'FAIL'}")
    summary.write_text("\n".join(lines) + "\n")
    entries = [run_dir / "config.toml", run_dir / "effective_config.json", summary, *files]
    record.manifest = [
        (str(p.relative_to(run_dir)), p.stat().st_size, _digest(p)) for p in dict.fromkeys(entries) if p.exists()
    ]
    manifest = run_dir / "manifest.json"
    manifest.write_text(json.dumps(asdict(record), indent=2) + "\n")
    return record


def execute(cfg: RunConfig, config_text: str, out=None, threads: int = 1) -> tuple[RunRecord, Path]:
    """Run one experiment; the record is written even when the experiment fails."""
    from .experiments import EXPERIMENTS as DRIVERS

    run_dir = run_directory(cfg, out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.toml").write_text(config_text)
    (run_dir / "effective_config.json").write_text(json.dumps(json.loads(cfg.canonical()), indent=2, sort_keys=True) + "\n")
    record = RunRecord(cfg.config_hash(), cfg.experiment, _now())
    files = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else _SerialPool()
    try:
        outcome = DRIVERS[cfg.experiment](cfg, run_dir, pool)
        files = outcome.files
        record.summary = [(c.name, bool(c.passed), float(c.value), c.tolerance, c.detail) for c in outcome.checks]
    except Exception as exc:  # surfaced in the summary with experiment context
        record.error = f"{cfg.experiment}: {type(exc).__name__}: {exc}"
        log.debug("experiment failed\n%s", traceback.format_exc())
    finally:
        if isinstance(pool, ThreadPoolExecutor):
            pool.shutdown()
        _close(record, run_dir, files)
    return record, run_dir


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nearcouette", description="Near-Couette channel flow stability experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", help="parent directory for the run directory (default: output_dir from the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points and modes")
    p.add_argument("--seed", type=int, help="seed for random probes (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(args.config, args.experiment)
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError(["seed: expected a non-negative integer"])
            cfg = cfg.with_overrides(seed=args.seed)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    record, run_dir = execute(cfg, Path(args.config).read_text(), args.out, args.threads)
    print((run_dir / "summary.txt").read_text(), end="")
    print(f"run directory: {run_dir}")
    return EXIT_OK if record.passed else EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
