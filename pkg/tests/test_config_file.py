from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from scripts.config_file import load_config
from scripts.config_solver import ENV_LAMBDA_MIN, ENV_THREADS, SolverConfig
from scripts.constants import BANDWIDTH, USER_HELPER_DISTANCES
from scripts.errors import ConfigError


def write(tmp_path: Path, text: str, name: str = "run.ini") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


MINIMAL = """
# minimal instance
[instance]
N = 4
K = 3
T = 0.1
"""


def test_minimal_config_fills_defaults(tmp_path):
    loaded = load_config(write(tmp_path, MINIMAL))
    inst = loaded.instance()
    assert (inst.N, inst.K, inst.T) == (4, 3, 0.1)
    assert inst.B == BANDWIDTH
    assert loaded.geometry().d_user_helper == USER_HELPER_DISTANCES
    echo = loaded.echo()
    assert echo["instance"]["B"] == BANDWIDTH
    assert echo["solver"]["lambda_min"] == SolverConfig().lambda_min
    assert "sweep" not in echo


def test_instances_are_reproducible_from_the_seed(tmp_path):
    a = load_config(write(tmp_path, MINIMAL + "seed = 5\n")).instance()
    b = load_config(write(tmp_path, MINIMAL + "seed = 5\n", "other.ini")).instance()
    assert np.array_equal(a.g, b.g)


@pytest.mark.parametrize("text,key", [
    ("[instance]\nN = 4\nK = 1\n", "instance.T"),
    ("[instance]\nK = 1\nT = 0.1\n", "instance.N"),
    ("[instance]\nN = 4\nK = 1\nT = -0.1\n", "instance.T"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\nbandwidth = 1e6\n", "instance.bandwidth"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\n[sweep]\nvariable = T\nvalues =\n", "sweep.values"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\n[sweep]\nvariable = T\nvalues = 0.2, 0.1\n", "sweep.values"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\n[sweep]\nvariable = P_max\nvalues = 1\n", "sweep.variable"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\n[verify]\nseeds = 0\n", "verify.seeds"),
    ("[instance]\nN = 4\nK = 2\nT = 0.1\nh = 1e-4\n", "instance.h"),
    ("[instance]\nN = 4\nK = 1\nT = 0.1\n[plots]\nx = 1\n", "plots"),
    ("[instance]\nN = 4\nK = 2\nT = 0.1\n[geometry]\nd_user_helper = 2\n", "geometry.d_user_helper"),
])
def test_invalid_configs_name_the_key(tmp_path, text, key):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.key == key


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_explicit_channels_override_sampling(tmp_path):
    text = """
[instance]
N = 2
K = 1
T = 0.05
g0 = 1e-2+1e-3j, -2e-3j   # user
g1 = 3e-3, 4e-3-1e-3j
h = 2.5e-4
"""
    inst = load_config(write(tmp_path, text)).instance()
    assert inst.g[0] == pytest.approx([1e-2 + 1e-3j, -2e-3j])
    assert inst.g[1] == pytest.approx([3e-3, 4e-3 - 1e-3j])
    assert inst.h.tolist() == [2.5e-4]


@pytest.mark.parametrize("channels,key", [
    ("g0 = 1, 2\n", "instance.g1"),
    ("g0 = 1, 2\ng1 = 1\n", "instance.g1"),
    ("g0 = 1, 2\ng1 = 1, abc\n", "instance.g1"),
])
def test_explicit_channel_errors(tmp_path, channels, key):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "[instance]\nN = 2\nK = 1\nT = 0.1\n" + channels))
    assert info.value.key == key


def test_sweep_and_verify_sections(tmp_path):
    text = MINIMAL + """
[sweep]
variable = d_user_helper
values = 2, 4, 8
trials = 5
schemes = proposed, local_only

[verify]
seeds = 3
grid_t1 = 40
"""
    run = load_config(write(tmp_path, text)).run
    assert run.sweep.values == [2.0, 4.0, 8.0]
    assert run.sweep.schemes == ["proposed", "local_only"]
    assert run.verify.resolution == (40, 200, 400)


def test_solver_settings_resolution_order(tmp_path, monkeypatch):
    loaded = load_config(write(tmp_path, MINIMAL + "[solver]\nthreads = 2\nlambda_min = 1e-10\n"))
    monkeypatch.delenv(ENV_THREADS, raising=False)
    monkeypatch.delenv(ENV_LAMBDA_MIN, raising=False)
    assert loaded.solver_config().threads == 2
    assert loaded.solver_config().lambda_min == 1e-10

    monkeypatch.setenv(ENV_THREADS, "3")
    assert loaded.solver_config().threads == 3
    assert loaded.solver_config(threads=5).threads == 5

    monkeypatch.setenv(ENV_LAMBDA_MIN, "not-a-number")
    with pytest.raises(ConfigError) as info:
        loaded.solver_config()
    assert info.value.key == ENV_LAMBDA_MIN
