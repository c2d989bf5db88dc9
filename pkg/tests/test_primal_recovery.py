from __future__ import annotations

import numpy as np
import pytest

from scripts.core.baselines import solve_local_only
from scripts.core.dual_core import DualPoint, RateTriple, reference_scales
from scripts.core.model import EnergyCovariance, Solution, check_feasible
from scripts.core.primal_recovery import (
    assemble_solution,
    build_recovery_sdp,
    duality_gap,
    reduce_subspace,
    solve_recovery_sdp,
)
from scripts.errors import InputError

from conftest import make_instance


def test_reduce_subspace_drops_dependent_channels(rng):
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    U = reduce_subspace(np.vstack([a, 2j * a, -a]))
    assert U.shape == (4, 1)
    assert U.conj().T @ U == pytest.approx(np.eye(1))

    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    U = reduce_subspace(np.vstack([a, b]))
    assert U.shape == (4, 2)
    projected = U @ (U.conj().T @ b)
    assert projected == pytest.approx(b)

    with pytest.raises(InputError):
        reduce_subspace(np.zeros((2, 3)))


def test_no_helper_recovery_is_the_mrt_beam(local_instance):
    inst = local_instance
    scale = reference_scales(inst)
    dp = DualPoint.from_vector(scale, 0)
    res = solve_recovery_sdp(dp, inst, 0.0, rates=[])
    sol = assemble_solution(inst, res.Q, res.ell0, res.ell, [])

    local = solve_local_only(inst)
    assert sol.Q.trace == pytest.approx(inst.P_max, rel=1e-8)
    assert sol.Q.beams(rel_tol=1e-6).shape[1] == 1
    assert sol.objective == pytest.approx(local.objective, rel=1e-8)
    assert check_feasible(inst, sol).feasible


def test_local_bits_beyond_the_harvest_are_flagged(local_instance):
    inst = local_instance
    too_many = 2.0 * solve_local_only(inst).objective
    sdp = build_recovery_sdp(inst, [], too_many)
    assert sdp.adjusted
    assert sdp.E0_comp < inst.mrt_energy(0)
    assert sdp.ell0 < too_many


def test_recovery_with_fixed_rates_is_feasible_and_uses_helpers():
    inst = make_instance(N=4, K=2, seed=5, d_user_helper=(2.0, 2.0), d_et_helper=(3.0, 3.0))
    scale = reference_scales(inst)
    dp = DualPoint.from_vector(scale, inst.K)
    rates = [RateTriple(4e5, 2e5, 3e6), RateTriple(3e5, 2.5e5, 2e6)]
    res = solve_recovery_sdp(dp, inst, 0.0, rates=rates)
    sol = assemble_solution(inst, res.Q, res.ell0, res.ell, rates)

    report = check_feasible(inst, sol)
    assert report.feasible, [s.label for s in report.violations]
    assert res.stage1_bits > 0
    assert np.sum(res.ell) >= (1.0 - 1e-6) * res.stage1_bits
    for k in range(1, inst.K + 1):
        if sol.ell[k] > 0:
            assert sol.t[k - 1] == pytest.approx(sol.ell[k] / rates[k - 1].as_array())
            assert np.sum(sol.t[k - 1]) <= inst.T * (1 + 1e-9)


def test_dark_instance_recovers_nothing():
    inst = make_instance(P_max=0.0)
    dp = DualPoint.from_vector(np.ones(2 * inst.K + 2), inst.K)
    res = solve_recovery_sdp(dp, inst, 0.0, rates=[RateTriple(1.0, 1.0, 1.0)] * inst.K)
    assert res.ell0 == 0.0
    assert not np.any(res.ell)
    assert res.Q.trace == 0.0


def test_rate_count_must_match_helpers(default_instance):
    dp = DualPoint.from_vector(reference_scales(default_instance), default_instance.K)
    with pytest.raises(InputError):
        solve_recovery_sdp(dp, default_instance, 0.0, rates=[])


def test_duality_gap_is_relative_to_the_dual_value(local_instance):
    inst = local_instance
    sol = Solution.build(inst, [900.0], np.zeros((0, 3)), EnergyCovariance.zeros(inst.N))
    assert duality_gap(sol, 1000.0) == pytest.approx(0.1)
    assert duality_gap(sol, 900.0) == 0.0
