from __future__ import annotations

import numpy as np
import pytest

from scripts.core.baselines import solve_local_only
from scripts.core.dual_core import DualPoint, reference_scales
from scripts.core.model import Solution, check_feasible
from scripts.core.oracle import KKT_CATEGORIES, EnergyFrontier, brute_force_small, kkt_residuals
from scripts.errors import InputError

from conftest import make_instance


def test_brute_force_needs_one_helper(default_instance):
    with pytest.raises(InputError):
        brute_force_small(default_instance, (10, 10, 10))
    with pytest.raises(InputError):
        brute_force_small(make_instance(N=2, K=1), (1, 10, 10))


def test_frontier_ends_at_both_mrt_beams(single_helper_instance):
    inst = single_helper_instance
    front = EnergyFrontier.of(inst)
    assert front.user_energy(0.0) == pytest.approx(inst.mrt_energy(0), rel=1e-12)
    assert front.helper_energy(front.theta_max) == pytest.approx(inst.mrt_energy(1), rel=1e-9)
    assert np.linalg.norm(front.beam(0.3)) == pytest.approx(1.0, rel=1e-12)


def test_frontier_angle_inverts_helper_energy(single_helper_instance):
    front = EnergyFrontier.of(single_helper_instance)
    low = float(front.helper_energy(0.0))
    for theta in np.linspace(0.05, 0.95, 10) * front.theta_max:
        energy = float(front.helper_energy(theta))
        if energy > low:
            assert float(front.angle_for(energy)) == pytest.approx(theta, rel=1e-5, abs=1e-9)
    assert np.isnan(front.angle_for(2.0 * single_helper_instance.mrt_energy(1)))


def test_user_energy_falls_as_the_helper_asks_for_more(single_helper_instance):
    inst = single_helper_instance
    front = EnergyFrontier.of(inst)
    demand = np.linspace(0.0, inst.mrt_energy(1) * (1.0 - 1e-6), 200)
    user = front.best_user_energy(demand)
    assert np.all(np.isfinite(user))
    assert np.all(np.diff(user) <= 1e-15 * inst.mrt_energy(0))


def test_oracle_result_is_feasible_and_beats_local(single_helper_instance):
    inst = single_helper_instance
    res = brute_force_small(inst, (20, 20, 30))
    assert check_feasible(inst, res.solution, 1e-9).feasible
    assert res.objective >= solve_local_only(inst).objective * (1.0 - 1e-12)
    assert res.candidates > 0


def test_refined_grids_never_lose():
    inst = make_instance(N=2, K=1, seed=5, d_user_helper=(2.0,), d_et_helper=(3.0,))
    coarse = brute_force_small(inst, (10, 10, 10))
    fine = brute_force_small(inst, (20, 20, 20))
    assert fine.objective >= coarse.objective * (1.0 - 1e-9)


def test_kkt_report_has_every_category(single_helper_instance):
    inst = single_helper_instance
    sol = solve_local_only(inst)
    dp = DualPoint.from_vector(reference_scales(inst), inst.K)
    report = kkt_residuals(sol, dp, inst)
    assert set(report.residuals) == set(KKT_CATEGORIES)
    assert report.residuals["primal"] <= 1e-12
    assert report.residuals["dual"] == 0.0
    assert report.max_residual == max(report.residuals.values())
    name, value = report.worst()
    assert report.details[name] == value


def test_kkt_primal_residual_flags_overdrawn_energy(single_helper_instance):
    inst = single_helper_instance
    sol = solve_local_only(inst)
    greedy = Solution.build(inst, sol.ell * np.array([1.1, 1.0]), sol.t, sol.Q)
    dp = DualPoint.from_vector(reference_scales(inst), inst.K)
    report = kkt_residuals(greedy, dp, inst)
    assert report.residuals["primal"] > 0.1
    assert not report.passed(1e-6)


def test_perturbed_local_bits_break_stationarity():
    from scripts.solver import CooperativeSolver

    inst = make_instance(N=2, K=1, seed=1)
    rep = CooperativeSolver(keep_history=False).solve(inst)
    sol = rep.solution
    assert kkt_residuals(sol, rep.dual_point, inst, rates=rep.rates).residuals["stationarity"] <= 1e-6
    bumped = Solution.build(inst, sol.ell * np.array([1.01, 1.0]), sol.t, sol.Q)
    report = kkt_residuals(bumped, rep.dual_point, inst, rates=rep.rates)
    assert report.residuals["stationarity"] > 1e-3
