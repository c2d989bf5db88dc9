from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest


PROJECT_ROOT = Path(__file__).resolve().parent.parent


def run_cmd(*args: str, env: dict[str, str] | None = None) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, *args],
        cwd=PROJECT_ROOT,
        capture_output=True,
        text=True,
        encoding="utf-8",
        errors="replace",
        check=False,
        env={**os.environ, "PYTHONIOENCODING": "utf-8", **(env or {})},
    )


def write_config(tmp_path: Path, name: str, text: str) -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


SMALL_INSTANCE = """
[instance]
N = 2
K = 1
T = 0.1
seed = 3
"""

SMALL_SWEEP = SMALL_INSTANCE + """
[sweep]
variable = T
values = 0.05, 0.1
trials = 2
seed = 11
"""

SMALL_VERIFY = SMALL_INSTANCE + """
[verify]
seeds = 2
grid_t1 = 300
grid_t2 = 300
grid_ell1 = 40
oracle_tol = 1e-3
gap_tol = 1e-4
kkt_tol = 1e-6
"""


def test_cli_help():
    result = run_cmd("scripts/main.py", "--help")
    assert result.returncode == 0
    for command in ("solve", "sweep", "verify"):
        assert command in result.stdout


def test_solve_writes_report(tmp_path):
    config = write_config(tmp_path, "solve.ini", SMALL_INSTANCE)
    result = run_cmd("scripts/main.py", "solve", config, "--output", str(tmp_path / "out"))
    assert result.returncode == 0, result.stderr
    report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
    assert set(report["schemes"]) == {"proposed", "equal_time", "local_only"}
    assert report["parameters"]["instance"]["P_max"] == 3.0


def test_solve_without_helpers_matches_local_computing(tmp_path):
    config = write_config(tmp_path, "local.ini", "[instance]\nN = 4\nK = 0\nT = 0.1\n")
    result = run_cmd("scripts/main.py", "solve", config, "-o", str(tmp_path))
    assert result.returncode == 0, result.stderr
    schemes = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))["schemes"]
    assert schemes["proposed"]["objective_bits"] == pytest.approx(schemes["local_only"]["objective_bits"], rel=1e-6)


def test_missing_key_exits_with_config_error(tmp_path):
    config = write_config(tmp_path, "bad.ini", "[instance]\nN = 2\nK = 1\n")
    result = run_cmd("scripts/main.py", "solve", config, "-o", str(tmp_path))
    assert result.returncode == 2
    assert "instance.T" in result.stderr


def test_sweep_with_empty_values_exits_with_config_error(tmp_path):
    config = write_config(tmp_path, "empty.ini", SMALL_INSTANCE + "[sweep]\nvariable = T\nvalues =\n")
    result = run_cmd("scripts/main.py", "sweep", config, "-o", str(tmp_path))
    assert result.returncode == 2
    assert "sweep.values" in result.stderr


def test_sweep_csv_is_reproducible(tmp_path):
    config = write_config(tmp_path, "small_sweep.ini", SMALL_SWEEP)
    first = run_cmd("scripts/main.py", "sweep", config, "-o", str(tmp_path / "a"))
    second = run_cmd("scripts/main.py", "sweep", config, "-o", str(tmp_path / "b"))
    assert first.returncode == 0, first.stderr
    assert second.returncode == 0, second.stderr

    a = (tmp_path / "a" / "small_sweep.csv").read_bytes()
    b = (tmp_path / "b" / "small_sweep.csv").read_bytes()
    lines = a.decode("utf-8").splitlines()
    header = [line for line in lines if line.startswith("#")]
    rows = [line for line in lines if not line.startswith("#")]
    assert any(line.startswith("# instance.B = ") for line in header)
    assert rows[0] == "sweep_var,sweep_value,scheme,trials,mean_bits,stderr_bits,mean_gap,failures"
    assert len(rows) == 1 + 2 * 3
    assert a == b


def test_verify_zero_seeds_exits_with_config_error(tmp_path):
    config = write_config(tmp_path, "zero.ini", SMALL_INSTANCE + "[verify]\nseeds = 0\n")
    result = run_cmd("scripts/main.py", "verify", config)
    assert result.returncode == 2
    assert "verify.seeds" in result.stderr


def test_verify_passes_on_small_grids(tmp_path):
    config = write_config(tmp_path, "verify.ini", SMALL_VERIFY)
    result = run_cmd("scripts/main.py", "verify", config)
    assert result.returncode == 0, result.stdout + result.stderr
    assert "2/2 passed" in result.stdout


def test_verify_fails_with_a_sabotaged_multiplier_floor(tmp_path):
    config = write_config(tmp_path, "verify.ini", SMALL_VERIFY.replace("seeds = 2", "seeds = 1"))
    result = run_cmd("scripts/main.py", "verify", config, env={"WPTCC_LAMBDA_MIN": "1e15"})
    assert result.returncode == 3
