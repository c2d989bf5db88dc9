#!/usr/bin/env python3
"""
Benchmark schemes.

- local only: the user computes everything itself and the energy
  transmitter beams all power at it.
- equal time: every helper splits the block into three equal slots; the
  remaining problem is solved through its (lambda, rho) dual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..config_solver import SolverConfig
from ..constants import SPECTRAL_CEILING
from ..errors import InfeasibleError, RecoveryError
from .barrier_sdp import BarrierSettings, LmiProblem, quadratic_coefficients, solve_lmi, trace_coefficients
from .dual_core import (
    DualPoint,
    feasibility_cut,
    optimal_local_bits,
    reference_scales,
)
from .ellipsoid import OracleAnswer, ellipsoid_minimize
from .model import (
    LN2,
    EnergyCovariance,
    Instance,
    Solution,
    helper_compute_energy,
    helper_tx_energy,
    offload_tx_energy,
    user_compute_energy,
)
from .primal_recovery import reduce_subspace

logger = logging.getLogger(__name__)

EXP_CAP = 700.0


def solve_local_only(inst: Instance) -> Solution:
    """纯本地计算基准方案

    MRT beam at the user; all bits computed locally with the user energy budget tight.
    """
    Q = EnergyCovariance.mrt(inst.g[0], inst.P_max)
    energy = inst.mrt_energy(0)
    ell0 = float(np.cbrt(energy * inst.T**2 / (inst.xi[0] * inst.C[0] ** 3))) if energy > 0 else 0.0
    ell = np.zeros(inst.K + 1)
    ell[0] = ell0
    return Solution.build(inst, ell, np.zeros((inst.K, 3)), Q)


# ---------------------------------------------------------------------------
# Equal-time allocation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EqualTimeResult:
    """等时隙基准方案结果"""
    solution: Solution
    dual_value: float
    dual_point: np.ndarray
    iterations: int


def _slot(inst: Instance) -> float:
    return inst.T / 3.0


def _helper_bits_equal_time(inst: Instance, k: int, lambda0: float, lambda_k: float) -> float:
    """Unique maximiser of helper k's strictly concave subproblem at t = T/3.

    Strict concavity makes the maximiser a continuous function of the
    multipliers, so at the dual optimum it is the primal optimum itself.
    """
    hp = inst.helper(k)
    tau = _slot(inst)
    c1 = lambda0 * hp.sigma2 * LN2 / (hp.h * hp.B)
    c3 = lambda_k * hp.sigma2_user * hp.beta * LN2 / (hp.h * hp.B)
    c2 = 3.0 * lambda_k * hp.xi * hp.C**3 / tau**2

    def slope(ell: float) -> float:
        e1 = math.exp(min(ell / (tau * hp.B) * LN2, EXP_CAP))
        e3 = math.exp(min(hp.beta * ell / (tau * hp.B) * LN2, EXP_CAP))
        return 1.0 - c1 * e1 - c3 * e3 - c2 * ell * ell

    if slope(0.0) <= 0:
        return 0.0
    hi = SPECTRAL_CEILING * hp.B * hp.T
    for _ in range(2000):
        if slope(hi) <= 0:
            break
        hi *= 2.0
    return float(brentq(slope, 0.0, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps))


def _helper_demand(inst: Instance, k: int, ell_k: float) -> float:
    hp = inst.helper(k)
    tau = _slot(inst)
    return (
        helper_tx_energy(ell_k, tau, hp.beta, hp.B, hp.h, hp.sigma2_user)
        + helper_compute_energy(ell_k, tau, hp.xi, hp.C)
    )


def _user_offload(inst: Instance, ell: np.ndarray) -> float:
    tau = _slot(inst)
    return sum(
        offload_tx_energy(float(ell[k]), tau, inst.B, float(inst.h[k - 1]), float(inst.sigma2[k]))
        for k in range(1, inst.K + 1)
    )


def _equal_time_dual(lam: np.ndarray, rho: float, inst: Instance, lambda_min: float):
    """Dual value, subgradient (over [lambda, rho]) and maximisers."""
    lam0 = float(lam[0])
    ell = np.zeros(inst.K + 1)
    ell[0] = optimal_local_bits(lam0, inst, lambda_min)
    value = rho * inst.P_max
    value += ell[0] - lam0 * user_compute_energy(ell[0], inst.T, float(inst.xi[0]), float(inst.C[0]))

    grad = np.zeros(inst.K + 2)
    for k in range(1, inst.K + 1):
        ell[k] = _helper_bits_equal_time(inst, k, lam0, float(lam[k]))
        offload = offload_tx_energy(ell[k], _slot(inst), inst.B, float(inst.h[k - 1]), float(inst.sigma2[k]))
        demand = _helper_demand(inst, k, ell[k])
        value += ell[k] - lam0 * offload - lam[k] * demand
        grad[k] = -demand
    grad[0] = -(user_compute_energy(ell[0], inst.T, float(inst.xi[0]), float(inst.C[0])) + _user_offload(inst, ell))
    grad[-1] = inst.P_max
    return float(value), grad, ell


def _max_min_slack_covariance(
    inst: Instance,
    required: np.ndarray,
    settings: BarrierSettings,
) -> tuple[EnergyCovariance, float]:
    """Q maximising the smallest relative energy surplus of all nodes."""
    U = reduce_subspace(inst.g)
    m = U.shape[1]
    m2 = m * m
    g_reduced = (inst.g.conj() @ U).conj()

    rows, rhs = [], []
    for k in range(inst.K + 1):
        scale = max(inst.mrt_energy(k), 1e-300)
        row = np.zeros(m2 + 1)
        row[:m2] = -inst.T * inst.zeta[k] * inst.P_max * quadratic_coefficients(g_reduced[k], m)
        row[-1] = scale
        rows.append(row)
        rhs.append(-required[k])
    row = np.zeros(m2 + 1)
    row[:m2] = trace_coefficients(m)
    rows.append(row)
    rhs.append(1.0)
    # surplus is capped so the problem stays bounded
    row = np.zeros(m2 + 1)
    row[-1] = 1.0
    rows.append(row)
    rhs.append(1.0)

    c = np.zeros(m2 + 1)
    c[-1] = -1.0
    res = solve_lmi(LmiProblem(m, 0, 1, c, np.array(rows), np.array(rhs)), settings=settings)
    Q = inst.P_max * (U @ res.C @ U.conj().T)
    return EnergyCovariance(0.5 * (Q + Q.conj().T)), float(res.free[0])


def _user_favoured_covariance(
    inst: Instance,
    required: np.ndarray,
    offload: float,
    settings: BarrierSettings,
) -> EnergyCovariance:
    """Q maximising the user's harvest while every helper keeps its required energy."""
    U = reduce_subspace(inst.g)
    m = U.shape[1]
    g_reduced = (inst.g.conj() @ U).conj()

    def harvest_row(k: int) -> np.ndarray:
        return inst.T * inst.zeta[k] * inst.P_max * quadratic_coefficients(g_reduced[k], m)

    rows = [-harvest_row(k) for k in range(inst.K + 1)]
    rhs = [-offload] + [-required[k] for k in range(1, inst.K + 1)]
    rows.append(trace_coefficients(m))
    rhs.append(1.0)

    c = -harvest_row(0) / max(inst.mrt_energy(0), 1e-300)
    res = solve_lmi(LmiProblem(m, 0, 0, c, np.array(rows), np.array(rhs)), settings=settings)
    Q = inst.P_max * (U @ res.C @ U.conj().T)
    return EnergyCovariance(0.5 * (Q + Q.conj().T))


def _harvest(inst: Instance, Q: EnergyCovariance, k: int) -> float:
    return float(inst.T * inst.zeta[k] * np.vdot(inst.g[k], Q.Q @ inst.g[k]).real)


def _repair(inst: Instance, Q: EnergyCovariance, ell: np.ndarray) -> np.ndarray:
    """Shrink helper bits to their harvested energy, then fill the user's."""
    ell = ell.copy()
    for k in range(1, inst.K + 1):
        budget = _harvest(inst, Q, k) * (1.0 - 1e-12)
        if ell[k] > 0 and _helper_demand(inst, k, ell[k]) > budget:
            ell[k] = 0.0 if budget <= 0 else brentq(
                lambda x: _helper_demand(inst, k, x) - budget, 0.0, ell[k], xtol=1e-12
            )

    harvest0 = _harvest(inst, Q, 0) * (1.0 - 1e-12)
    offload = _user_offload(inst, ell)
    if offload > harvest0:
        base = ell.copy()

        def excess(f: float) -> float:
            scaled = base.copy()
            scaled[1:] *= f
            return _user_offload(inst, scaled) - harvest0

        f = brentq(excess, 0.0, 1.0, xtol=1e-15) if harvest0 > 0 else 0.0
        ell[1:] *= f
        offload = _user_offload(inst, ell)

    leftover = max(harvest0 - offload, 0.0)
    ell[0] = float(np.cbrt(leftover * inst.T**2 / (inst.xi[0] * inst.C[0] ** 3)))
    return ell


def solve_equal_time(inst: Instance, config: Optional[SolverConfig] = None) -> EqualTimeResult:
    """等时隙基准方案"""
    config = config or SolverConfig()
    t = np.full((inst.K, 3), _slot(inst))
    if inst.P_max == 0 or np.linalg.norm(inst.g) == 0:
        sol = Solution.build(inst, np.zeros(inst.K + 1), t, EnergyCovariance.zeros(inst.N))
        return EqualTimeResult(solution=sol, dual_value=0.0, dual_point=np.zeros(inst.K + 2), iterations=0)

    full = reference_scales(inst)
    scale = np.concatenate([full[: inst.K + 1], full[-1:]])
    center = np.maximum(1.0, 2.0 * config.lambda_min / scale)
    center[-1] = 1.0

    def oracle(z: np.ndarray) -> OracleAnswer:
        v = z * scale
        dp = DualPoint(lam=v[:-1], mu=np.zeros(inst.K), rho=v[-1])
        cut = feasibility_cut(dp, inst, config.lambda_min)
        if cut is not None:
            grad = np.concatenate([cut.gradient[: inst.K + 1], cut.gradient[-1:]])
            return OracleAnswer.cut(grad * scale)
        value, grad, _ = _equal_time_dual(v[:-1], v[-1], inst, config.lambda_min)
        return OracleAnswer.objective(value, grad * scale)

    res = ellipsoid_minimize(
        oracle, center, config.radius0,
        vol_tol=config.vol_tol, max_iter=config.max_iter(inst.K + 2), gap_tol=config.gap_tol,
        keep_history=False,
    )
    v = res.point * scale
    _, _, ell = _equal_time_dual(v[:-1], v[-1], inst, config.lambda_min)

    required = np.zeros(inst.K + 1)
    required[0] = user_compute_energy(ell[0], inst.T, float(inst.xi[0]), float(inst.C[0])) + _user_offload(inst, ell)
    for k in range(1, inst.K + 1):
        required[k] = _helper_demand(inst, k, ell[k])

    settings = BarrierSettings.from_config(config)
    try:
        Q, surplus = _max_min_slack_covariance(inst, required, settings)
    except InfeasibleError as exc:
        raise RecoveryError(f"equal-time covariance recovery failed: {exc}") from exc
    if surplus < 0:
        logger.info("equal-time bits exceed harvestable energy (surplus %.3e); repairing", surplus)
    else:
        try:
            Q = _user_favoured_covariance(inst, required, _user_offload(inst, ell), settings)
        except InfeasibleError as exc:
            logger.debug("keeping the max-min covariance: %s", exc)

    ell = _repair(inst, Q, ell)
    sol = Solution.build(inst, ell, t, Q)
    logger.info("equal-time: %.6g bits (dual %.6g, %d iterations)", sol.objective, res.value, res.iterations)
    return EqualTimeResult(solution=sol, dual_value=res.value, dual_point=v, iterations=res.iterations)
