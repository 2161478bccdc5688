import json
import subprocess
import sys

import pytest

from nearcouette.cli import main

OPCHECK = """
experiment = "operator-check"
grid_n = 64
k = [1]
samples = 4
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_passing_run_writes_record(tmp_path, capsys):
    cfg = _write(tmp_path, OPCHECK)
    assert main(["operator-check", "--config", cfg, "--out", str(tmp_path / "runs")]) == 0
    (run_dir,) = (tmp_path / "runs").iterdir()
    assert run_dir.name.startswith("operator-check-")
    summary = (run_dir / "summary.txt").read_text()
    assert "overall: PASS" in summary
    manifest = json.loads((run_dir / "manifest.json").read_text())
    listed = {m[0] for m in manifest["manifest"]}
    assert {"config.toml", "effective_config.json", "summary.txt"} <= listed
    assert (run_dir / "config.toml").read_text() == OPCHECK
    assert "run directory" in capsys.readouterr().out


def test_failed_check_exits_one(tmp_path):
    cfg = _write(tmp_path, OPCHECK + "[tolerances]\nidentity = 1e-300\n")
    assert main(["operator-check", "--config", cfg, "--out", str(tmp_path)]) == 1
    (run_dir,) = tmp_path.glob("operator-check-*")
    assert "overall: FAIL" in (run_dir / "summary.txt").read_text()


def test_seed_override_changes_run_directory(tmp_path):
    cfg = _write(tmp_path, OPCHECK)
    main(["operator-check", "--config", cfg, "--out", str(tmp_path), "--seed", "1"])
    main(["operator-check", "--config", cfg, "--out", str(tmp_path), "--seed", "2"])
    assert len(list(tmp_path.glob("operator-check-*"))) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["operator-check"],
    ["nonsense", "--config", "x.toml"],
    ["operator-check", "--config", "x.toml", "--threads", "0"],
])
def test_usage_errors_exit_two(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "x.toml").write_text(OPCHECK)
    assert main(argv) == 2


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["operator-check", "--config", str(tmp_path / "missing.toml")]) == 2
    bad = _write(tmp_path, OPCHECK + "grid_n = 4\n", "bad.toml")
    assert main(["operator-check", "--config", bad]) == 2
    err = capsys.readouterr().err
    assert "config error" in err


def test_negative_seed_is_a_config_error(tmp_path):
    cfg = _write(tmp_path, OPCHECK)
    assert main(["operator-check", "--config", cfg, "--seed", "-1"]) == 2


def test_console_script_entry_point(tmp_path):
    cfg = _write(tmp_path, OPCHECK)
    proc = subprocess.run(
        [sys.executable, "-m", "nearcouette.cli", "operator-check", "--config", cfg, "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "overall: PASS" in proc.stdout
