from __future__ import annotations

import numpy as np
import pytest

from scripts.config_solver import SolverConfig
from scripts.core.barrier_sdp import (
    BarrierSettings,
    LmiProblem,
    hermitian_basis,
    lift,
    pack_hermitian,
    quadratic_coefficients,
    solve_lmi,
    trace_coefficients,
    unpack_hermitian,
)
from scripts.errors import InfeasibleError, InputError


def test_hermitian_parametrisation(rng):
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    C = A + A.conj().T
    x = pack_hermitian(C)
    assert x.shape == (9,)
    assert unpack_hermitian(x, 3) == pytest.approx(C)
    assert hermitian_basis(3).shape == (9, 3, 3)
    assert float(trace_coefficients(3) @ x) == pytest.approx(np.trace(C).real)

    a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert float(quadratic_coefficients(a, 3) @ x) == pytest.approx(np.vdot(a, C @ a).real)


def test_lifting_doubles_the_spectrum(rng):
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    C = A @ A.conj().T
    w = np.linalg.eigvalsh(C)
    assert np.linalg.eigvalsh(lift(C)) == pytest.approx(np.sort(np.repeat(w, 2)))


def test_max_quadratic_form_under_trace_budget(rng):
    m = 3
    a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    problem = LmiProblem(
        m=m, n_y=0, n_free=0,
        c=-quadratic_coefficients(a, m),
        G=trace_coefficients(m).reshape(1, -1),
        h=np.array([1.0]),
    )
    res = solve_lmi(problem)
    assert -res.objective == pytest.approx(np.linalg.norm(a) ** 2, rel=1e-8)
    w = np.linalg.eigvalsh(res.C)
    assert w[-1] == pytest.approx(1.0, rel=1e-6)
    assert w[0] == pytest.approx(0.0, abs=1e-6)
    assert not res.stalled


def test_scalar_variables_solve_a_linear_program():
    # maximise y1 + y2 subject to y1 + 2 y2 <= 4, y1 <= 3, tr C <= 1
    m = 1
    c = np.array([0.0, -1.0, -1.0])
    G = np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    h = np.array([4.0, 3.0, 1.0])
    res = solve_lmi(LmiProblem(m, 2, 0, c, G, h))
    assert res.y == pytest.approx([3.0, 0.5], abs=1e-6)
    assert res.objective == pytest.approx(-3.5, abs=1e-6)


def test_warm_start_is_used_when_strictly_feasible():
    c = np.array([0.0, -1.0])
    G = np.array([[0.0, 1.0], [1.0, 0.0]])
    h = np.array([2.0, 1.0])
    problem = LmiProblem(1, 1, 0, c, G, h)
    cold = solve_lmi(problem)
    warm = solve_lmi(problem, z0=np.array([0.5, 1.0]))
    assert warm.y[0] == pytest.approx(2.0, abs=1e-8)
    assert cold.y[0] == pytest.approx(2.0, abs=1e-8)


def test_infeasible_problem_raises():
    m = 2
    problem = LmiProblem(m, 0, 0, np.zeros(m * m), trace_coefficients(m).reshape(1, -1), np.array([-1.0]))
    with pytest.raises(InfeasibleError):
        solve_lmi(problem)


def test_problem_shape_is_validated():
    with pytest.raises(InputError):
        LmiProblem(2, 0, 0, np.zeros(3), np.zeros((1, 4)), np.zeros(1))
    with pytest.raises(InputError):
        LmiProblem(2, 0, 0, np.zeros(4), np.zeros((2, 4)), np.zeros(1))


def test_settings_follow_solver_config():
    cfg = SolverConfig(barrier_tol=1e-8, barrier_mu=20.0, line_search_alpha=0.1, line_search_beta=0.7)
    s = BarrierSettings.from_config(cfg)
    assert (s.tol, s.mu, s.alpha, s.beta) == (1e-8, 20.0, 0.1, 0.7)
