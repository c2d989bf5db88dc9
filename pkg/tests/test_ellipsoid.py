from __future__ import annotations

import numpy as np
import pytest

from scripts.core.ellipsoid import EllipsoidState, OracleAnswer, central_cut, ellipsoid_minimize
from scripts.errors import InfeasibleError, InputError, NumericError


def quadratic_over_halfplane(target, lower):
    """min |x - target|^2 subject to x >= lower (componentwise)."""
    target = np.asarray(target, dtype=float)
    lower = np.asarray(lower, dtype=float)

    def oracle(x):
        gap = lower - x
        i = int(np.argmax(gap))
        if gap[i] > 0:
            g = np.zeros_like(x)
            g[i] = -1.0
            return OracleAnswer.cut(g)
        d = x - target
        return OracleAnswer.objective(float(d @ d), 2.0 * d)

    return oracle


def test_unconstrained_minimum_is_found():
    res = ellipsoid_minimize(quadratic_over_halfplane([3.0, -1.0], [-10.0, -10.0]), [0.0, 0.0], 10.0,
                             vol_tol=1e-8, gap_tol=1e-12)
    assert res.point == pytest.approx([3.0, -1.0], abs=1e-4)
    assert res.value == pytest.approx(0.0, abs=1e-8)
    assert res.lower_bound <= res.value


def test_constrained_minimum_lies_on_the_boundary():
    res = ellipsoid_minimize(quadratic_over_halfplane([3.0, -1.0, 2.0], [0.0, 0.0, 0.0]), np.ones(3), 10.0,
                             vol_tol=1e-8, gap_tol=1e-12)
    assert res.point == pytest.approx([3.0, 0.0, 2.0], abs=1e-3)
    assert res.value == pytest.approx(1.0, abs=1e-3)


def test_one_dimensional_cut_halves_the_interval():
    state = EllipsoidState(center=np.array([0.0]), shape=np.array([[4.0]]))
    width = central_cut(state, np.array([1.0]))
    assert width == pytest.approx(2.0)
    assert state.center[0] == pytest.approx(-1.0)
    assert state.shape[0, 0] == pytest.approx(1.0)


def test_one_dimensional_absolute_value():
    def oracle(x):
        return OracleAnswer.objective(abs(x[0] - 2.0), [np.sign(x[0] - 2.0) or 1.0])

    res = ellipsoid_minimize(oracle, [0.0], 100.0, vol_tol=1e-12)
    assert res.point[0] == pytest.approx(2.0, abs=1e-8)
    assert res.stop_reason in {"volume", "gap"}


def test_certified_gap_stop():
    res = ellipsoid_minimize(quadratic_over_halfplane([1.0, 1.0], [-5.0, -5.0]), [0.0, 0.0], 10.0,
                             vol_tol=1e-300, gap_tol=1e-6)
    assert res.stop_reason == "gap"
    assert res.gap <= 1e-6 * max(1.0, abs(res.value))


def test_zero_subgradient_stops_immediately():
    res = ellipsoid_minimize(lambda x: OracleAnswer.objective(5.0, np.zeros(2)), [1.0, 1.0], 1.0)
    assert res.stop_reason == "zero_subgradient"
    assert res.iterations == 0
    assert res.value == 5.0 and res.lower_bound == 5.0


def test_iteration_cap_and_history():
    res = ellipsoid_minimize(quadratic_over_halfplane([1.0, 1.0], [-5.0, -5.0]), [0.0, 0.0], 10.0,
                             vol_tol=1e-300, gap_tol=0.0, max_iter=25)
    assert res.stop_reason == "max_iter"
    assert res.iterations == 25
    assert len(res.history) == 25
    log_dets = [h.log_det for h in res.history]
    assert all(b < a for a, b in zip(log_dets, log_dets[1:]))


def test_empty_feasible_set_raises():
    with pytest.raises(InfeasibleError):
        ellipsoid_minimize(lambda x: OracleAnswer.cut([1.0, 0.0]), [0.0, 0.0], 1.0, max_iter=50)


def test_invalid_oracle_output_is_reported_with_iteration():
    with pytest.raises(NumericError) as info:
        ellipsoid_minimize(lambda x: OracleAnswer.objective(1.0, [np.nan, 0.0]), [0.0, 0.0], 1.0)
    assert info.value.iteration == 0


def test_invalid_arguments():
    with pytest.raises(InputError):
        ellipsoid_minimize(lambda x: OracleAnswer.objective(0.0, x), [0.0], 0.0)
    with pytest.raises(InputError):
        ellipsoid_minimize(lambda x: OracleAnswer.objective(0.0, x), [], 1.0)


def l1_norm_with_cut_at_one(x):
    if x[0] < 1.0:
        return OracleAnswer.cut([-1.0, 0.0])
    return OracleAnswer.objective(float(abs(x[0]) + abs(x[1])), np.sign(x))


def test_l1_norm_beyond_a_halfplane():
    res = ellipsoid_minimize(l1_norm_with_cut_at_one, [3.0, 2.0], 10.0,
                             vol_tol=1e-8, gap_tol=0.0, max_iter=5000)
    assert res.point == pytest.approx([1.0, 0.0], abs=1e-4)
    assert res.value == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_every_cut_shrinks_the_volume_enough(n):
    res = ellipsoid_minimize(quadratic_over_halfplane(np.arange(n) + 0.5, -np.ones(n)), np.zeros(n), 10.0,
                             vol_tol=1e-300, gap_tol=0.0, max_iter=40)
    log_dets = [h.log_det for h in res.history]
    assert len(log_dets) >= 2
    for a, b in zip(log_dets, log_dets[1:]):
        assert b - a <= -1.0 / (n + 1) + 1e-9


def test_best_value_never_gets_worse_with_more_iterations():
    values = [
        ellipsoid_minimize(l1_norm_with_cut_at_one, [3.0, 2.0], 10.0,
                           vol_tol=1e-300, gap_tol=0.0, max_iter=m).value
        for m in (5, 10, 20, 40, 80, 160)
    ]
    assert all(b <= a for a, b in zip(values, values[1:]))
