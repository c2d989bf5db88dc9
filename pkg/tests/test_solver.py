from __future__ import annotations

import json

import numpy as np
import pytest

from scripts.config_solver import SolverConfig
from scripts.constants import GAP_TOL
from scripts.core.baselines import solve_equal_time, solve_local_only
from scripts.core.model import Solution, check_feasible
from scripts.core.scenarios import Geometry, InstanceTemplate, SweepConfig, run_sweep
from scripts.errors import EXIT_SOLVER, InputError, RecoveryError, exit_code_for
from scripts.solver import CooperativeSolver, VerifyOutcome

from conftest import make_instance


@pytest.fixture(scope="module")
def solver() -> CooperativeSolver:
    return CooperativeSolver(keep_history=False)


def test_no_helpers_reduces_to_local_computing(solver, local_instance):
    rep = solver.solve(local_instance)
    local = solve_local_only(local_instance)
    assert rep.objective == pytest.approx(local.objective, rel=1e-6)
    assert rep.gap <= GAP_TOL


@pytest.mark.parametrize("seed", [1, 2])
def test_single_helper_dominates_the_benchmarks(solver, seed):
    inst = make_instance(N=2, K=1, seed=seed)
    rep = solver.solve(inst)
    assert check_feasible(inst, rep.solution, 1e-9).feasible
    assert rep.gap <= GAP_TOL
    assert rep.objective >= solve_local_only(inst).objective * (1.0 - 1e-6)
    assert rep.objective >= solve_equal_time(inst).solution.objective * (1.0 - 1e-6)
    assert rep.dual_value >= rep.objective * (1.0 - 1e-9)
    assert rep.refined
    assert rep.kkt.passed(1e-6), rep.kkt.worst()


def test_three_helpers(solver, default_instance):
    inst = default_instance
    rep = solver.solve(inst)
    sol = rep.solution
    assert check_feasible(inst, sol, 1e-9).feasible
    assert rep.gap <= GAP_TOL
    assert rep.objective >= solve_equal_time(inst).solution.objective * (1.0 - 1e-6)
    assert len(rep.rates) == inst.K
    assert set(rep.kkt.residuals) == {"primal", "dual", "complementary", "stationarity"}
    assert rep.refined
    assert rep.kkt.passed(1e-6), rep.kkt.worst()
    # a helper that receives bits has time scheduled for it
    for k in range(1, inst.K + 1):
        if sol.ell[k] > 0:
            assert np.all(sol.t[k - 1] > 0)
            assert np.sum(sol.t[k - 1]) <= inst.T * (1.0 + 1e-9)


def test_no_power_means_no_computation(solver):
    rep = solver.solve(make_instance(P_max=0.0))
    assert rep.objective == 0.0
    assert rep.stop_reason == "no_energy"
    assert rep.iterations == 0


def test_history_is_kept_on_request(single_helper_instance):
    rep = CooperativeSolver(keep_history=True).solve(single_helper_instance)
    assert rep.history and rep.history[0].iteration == 0
    assert rep.history[-1].iteration <= rep.iterations


def test_unknown_scheme(solver, local_instance):
    with pytest.raises(InputError):
        solver.run_scheme("greedy", local_instance)


def test_verify_against_exhaustive_search(solver):
    inst = make_instance(N=2, K=1, seed=4)
    outcome = solver.verify(inst, seed=4, resolution=(300, 300, 40))
    assert outcome.error is None
    # exhaustive search only sees feasible points
    assert outcome.oracle_bits <= outcome.solver_bits * (1.0 + 2.0 * GAP_TOL)
    assert outcome.deviation <= 1e-3
    assert outcome.kkt <= 1e-6
    assert outcome.passed(1e-3, GAP_TOL, 1e-6)


def test_verify_reports_failures_instead_of_raising(solver, default_instance):
    outcome = solver.verify(default_instance, seed=0, resolution=(10, 10, 10))
    assert outcome.error is not None and outcome.error.startswith("InputError")
    assert not outcome.passed(1.0, 1.0, 1.0)


def test_verify_outcome_thresholds():
    ok = VerifyOutcome(seed=0, solver_bits=10.0, oracle_bits=10.0, deviation=1e-4, gap=1e-5, kkt=1e-7)
    assert ok.passed(1e-3, 1e-4, 1e-6)
    assert not ok.passed(1e-5, 1e-4, 1e-6)
    assert not ok.passed(1e-3, 1e-4, 1e-8)


def test_solve_all_and_report(solver, single_helper_instance, tmp_path):
    inst = single_helper_instance
    results = solver.solve_all(inst)
    assert set(results) == {"proposed", "equal_time", "local_only"}
    assert results["proposed"]["report"] is not None
    assert results["local_only"]["report"] is None

    path = solver.save_report(inst, results, tmp_path, header={"instance": {"N": 2}})
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["parameters"]["instance"]["N"] == 2
    assert data["solver"]["lambda_min"] == SolverConfig().lambda_min
    proposed = data["schemes"]["proposed"]
    assert proposed["objective_bits"] == pytest.approx(results["proposed"]["solution"].objective)
    assert len(proposed["dual_point"]) == 2 * inst.K + 2
    assert [row["node"] for row in proposed["energy"]] == [0, 1]


def test_sweep_ordering_with_the_real_solver():
    cfg = SweepConfig(variable="T", values=(0.05, 0.1), trials=2, seed=3)
    table = run_sweep(cfg, InstanceTemplate(N=2, K=1), Geometry(d_et_user=5.0, d_et_helper=(5.0,), d_user_helper=(2.0,)))
    assert not table.failures
    for value in cfg.values:
        proposed = table.samples[(value, "proposed")]
        equal = table.samples[(value, "equal_time")]
        local = table.samples[(value, "local_only")]
        for p, e, lo in zip(proposed, equal, local):
            assert p >= e * (1.0 - 1e-6)
            assert p >= lo * (1.0 - 1e-6)
    series = table.series("proposed")
    assert series[1] > series[0]


def test_cooperation_gain_shrinks_with_helper_distance():
    cfg = SweepConfig(variable="d_user_helper", values=(2.0, 4.0, 8.0), trials=1, seed=6,
                      schemes=("proposed", "local_only"))
    table = run_sweep(cfg, InstanceTemplate(N=2, K=1), Geometry(d_et_user=5.0, d_et_helper=(5.0,), d_user_helper=(2.0,)))
    gaps = [table.row(v, "proposed").mean_gap for v in cfg.values]
    bits = table.row(cfg.values[0], "proposed").mean_bits
    assert all(b <= a + 2.0 * GAP_TOL * bits for a, b in zip(gaps, gaps[1:]))
    assert all(g >= -GAP_TOL * bits for g in gaps)


def _wasteful_assembly(inst, *args, **kwargs):
    """Keeps half of the local bits and offloads nothing."""
    local = solve_local_only(inst)
    return Solution.build(inst, local.ell * np.array([0.5] + [0.0] * inst.K),
                          np.zeros((inst.K, 3)), local.Q)


def test_recovery_below_local_computing_is_an_error(single_helper_instance, monkeypatch):
    def refuse(*args, **kwargs):
        raise RecoveryError("no interior point")

    monkeypatch.setattr("scripts.solver.assemble_solution", _wasteful_assembly)
    monkeypatch.setattr("scripts.solver.refine_solution", refuse)
    with pytest.raises(RecoveryError) as info:
        CooperativeSolver(keep_history=False).solve(single_helper_instance)
    assert "below local computing" in str(info.value)
    assert exit_code_for(info.value) == EXIT_SOLVER


def test_refinement_repairs_a_wasteful_recovery(single_helper_instance, monkeypatch):
    monkeypatch.setattr("scripts.solver.assemble_solution", _wasteful_assembly)
    rep = CooperativeSolver(keep_history=False).solve(single_helper_instance)
    assert rep.refined
    assert rep.objective >= solve_local_only(single_helper_instance).objective * (1.0 - 1e-9)
    assert check_feasible(single_helper_instance, rep.solution, 1e-9).feasible
