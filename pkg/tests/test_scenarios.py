from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from scripts.core.baselines import solve_local_only
from scripts.core.model import Solution
from scripts.core.scenarios import (
    SWEEP_VARIABLES,
    Geometry,
    InstanceTemplate,
    SweepConfig,
    apply_sweep_value,
    canonical_sweep_variable,
    run_sweep,
    sample_channels,
)
from scripts.errors import InputError, NumericError


def geometry(K: int = 2, d_user_helper: float = 2.0, d_et_helper: float = 5.0) -> Geometry:
    return Geometry(d_et_user=5.0, d_et_helper=(d_et_helper,) * K, d_user_helper=(d_user_helper,) * K)


def test_channels_are_reproducible_per_seed_and_trial():
    tpl = InstanceTemplate(N=4, K=2)
    a = sample_channels(geometry(), tpl, seed=1, trial=0)
    b = sample_channels(geometry(), tpl, seed=1, trial=0)
    c = sample_channels(geometry(), tpl, seed=1, trial=1)
    d = sample_channels(geometry(), tpl, seed=2, trial=0)
    assert np.array_equal(a.g, b.g) and np.array_equal(a.h, b.h)
    assert not np.allclose(a.g, c.g)
    assert not np.allclose(a.g, d.g)


def test_common_random_numbers_across_distances_and_helper_counts():
    tpl = InstanceTemplate(N=4, K=2)
    near = sample_channels(geometry(d_user_helper=2.0), tpl, seed=9)
    far = sample_channels(geometry(d_user_helper=4.0), tpl, seed=9)
    assert np.array_equal(near.g, far.g)
    assert far.h == pytest.approx(near.h * (2.0 / 4.0) ** 3, rel=1e-12)

    one = sample_channels(geometry(K=1), InstanceTemplate(N=4, K=1), seed=9)
    assert np.array_equal(one.g, near.g[:2])
    assert one.h[0] == near.h[0]


def test_fading_is_rayleigh_with_the_path_loss_mean():
    geom = geometry(K=1)
    tpl = InstanceTemplate(N=4, K=1)
    power = np.concatenate([
        np.abs(sample_channels(geom, tpl, seed=123, trial=t).g[0]) ** 2 for t in range(500)
    ]) / geom.gain(5.0)
    assert power.mean() == pytest.approx(1.0, abs=0.08)
    # |CN(0, 1)|^2 is exponential with unit mean
    assert stats.kstest(power, "expon").pvalue > 1e-3


def test_geometry_and_template_validation():
    with pytest.raises(InputError):
        Geometry(d_et_user=5.0, d_et_helper=(5.0,), d_user_helper=(2.0, 3.0))
    with pytest.raises(InputError):
        Geometry(d_et_user=0.0, d_et_helper=(), d_user_helper=())
    with pytest.raises(InputError):
        sample_channels(geometry(K=2), InstanceTemplate(N=4, K=1), seed=0)


@pytest.mark.parametrize("kwargs", [
    {"variable": "T", "values": ()},
    {"variable": "P_max", "values": (1.0,)},
    {"variable": "T", "values": (0.2, 0.1)},
    {"variable": "T", "values": (0.0, 0.1)},
    {"variable": "T", "values": (0.1,), "trials": 0},
    {"variable": "T", "values": (0.1,), "schemes": ("greedy",)},
])
def test_sweep_config_rejects_bad_input(kwargs):
    with pytest.raises(InputError):
        SweepConfig(**kwargs)


def test_apply_sweep_value():
    tpl, geom = InstanceTemplate(N=2, K=2), geometry()
    t, g = apply_sweep_value("T", 0.3, tpl, geom)
    assert t.T == 0.3 and g is geom
    t, g = apply_sweep_value("d_et_helper", 7.0, tpl, geom)
    assert g.d_et_helper == (7.0, 7.0) and g.d_user_helper == geom.d_user_helper
    t, g = apply_sweep_value("d_user_helper", 1.5, tpl, geom)
    assert g.d_user_helper == (1.5, 1.5)


def test_sweep_variables_accept_singular_spellings():
    assert SWEEP_VARIABLES == ("T", "d_et_helpers", "d_user_helpers")
    assert canonical_sweep_variable("d_et_helper") == "d_et_helpers"
    assert canonical_sweep_variable("d_user_helpers") == "d_user_helpers"
    assert SweepConfig(variable="d_user_helper", values=(1.0,)).variable == "d_user_helpers"
    table = run_sweep(SweepConfig(variable="d_et_helper", values=(4.0,), trials=1),
                      InstanceTemplate(N=2, K=2), geometry(), runner=local_runner)
    assert {row.sweep_var for row in table.rows} == {"d_et_helpers"}


def local_runner(scheme: str, inst) -> Solution:
    return solve_local_only(inst)


def test_sweep_aggregates_every_value_and_scheme():
    cfg = SweepConfig(variable="T", values=(0.05, 0.1), trials=3, seed=4)
    table = run_sweep(cfg, InstanceTemplate(N=2, K=2), geometry(), runner=local_runner)
    assert len(table.rows) == 2 * 3
    for row in table.rows:
        assert row.trials == 3 and row.failures == 0
        assert row.mean_gap == 0.0
        assert len(table.samples[(row.sweep_value, row.scheme)]) == 3
    # local computing grows with the block length
    series = table.series("local_only")
    assert series[1] > series[0]


def test_threaded_sweep_matches_serial_sweep():
    cfg = SweepConfig(variable="d_user_helper", values=(1.0, 2.0, 4.0), trials=2, seed=8)
    serial = run_sweep(cfg, InstanceTemplate(N=2, K=2), geometry(), runner=local_runner)
    threaded = run_sweep(cfg, InstanceTemplate(N=2, K=2), geometry(), runner=local_runner, threads=4)
    assert serial.rows == threaded.rows


def test_failed_trials_are_counted_not_raised():
    def runner(scheme: str, inst) -> Solution:
        if scheme == "equal_time":
            raise NumericError("diverged", iteration=3)
        if scheme == "proposed":
            sol = solve_local_only(inst)
            return Solution.build(inst, sol.ell * 2.0, sol.t, sol.Q)
        return solve_local_only(inst)

    cfg = SweepConfig(variable="T", values=(0.1,), trials=2)
    table = run_sweep(cfg, InstanceTemplate(N=2, K=1), geometry(K=1), runner=runner)
    failed = table.row(0.1, "equal_time")
    assert failed.failures == 2 and math.isnan(failed.mean_bits)
    # infeasible answers count as failures too
    assert table.row(0.1, "proposed").failures == 2
    assert table.row(0.1, "local_only").failures == 0
    assert {f.error for f in table.failures} == {"NumericError", "FeasibilityError"}
