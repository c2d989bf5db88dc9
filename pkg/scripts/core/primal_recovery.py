#!/usr/bin/env python3
"""
Primal recovery from the optimal dual point.

At the dual optimum the covariance subproblem is degenerate (Q* = 0) and
helpers break even (M = 0), so the Lagrangian maximisers do not identify
the primal optimum. With the rates fixed at their optimal values the
remaining problem in (Q, ell_1..ell_K) is a small SDP:

    max  sum_k ell_k
    s.t. sum_k a_k ell_k + E0_comp <= T zeta_0 tr(Q g0 g0^H)    (user)
         b_k ell_k <= T zeta_k tr(Q gk gk^H)                    (helper k)
         ell_k * sum_i 1 / r_k,i <= T                          (time, helper k)
         tr(Q) <= P_max,  Q >= 0

Q is restricted to the span of the channels (Q = P_max U C U^H), which loses
nothing: energy outside the span is never harvested.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla

from ..errors import InfeasibleError, InputError, RecoveryError
from .barrier_sdp import BarrierSettings, LmiProblem, quadratic_coefficients, solve_lmi, trace_coefficients
from .dual_core import DualPoint, RateTriple, optimal_rates
from .model import LN2, EnergyCovariance, Instance, Solution

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
OPT_KEEP = 1e-7
USER_MARGIN = 1e-6
ZERO_BITS = 1e-9


def reduce_subspace(g: np.ndarray) -> np.ndarray:
    """信道张成子空间

    Orthonormal basis (N, m) of span{g_0..g_K} by pivoted QR.
    """
    G = np.atleast_2d(np.asarray(g, dtype=complex))
    norms = np.linalg.norm(G, axis=1)
    if not norms.size or norms.max() == 0.0:
        raise InputError("all channel vectors are zero")
    Qm, R, _ = sla.qr(G.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * norms.max()))
    return Qm[:, : max(rank, 1)]


def user_unit_energy(r: RateTriple, hp) -> float:
    """用户每比特卸载能耗

    User's offloading energy per bit when the offload slot runs at r1.
    """
    return hp.sigma2 / (hp.h * r.r1) * math.expm1(r.r1 / hp.B * LN2)


def helper_unit_energy(r: RateTriple, hp) -> float:
    """助手每比特能耗

    Helper's result-return plus computing energy per bit at (r2, r3).
    """
    tx = hp.sigma2_user / (hp.h * r.r3) * math.expm1(hp.beta * r.r3 / hp.B * LN2)
    return tx + hp.xi * hp.C**3 * r.r2**2


@dataclass
class RecoverySdp:
    """原始解恢复 SDP"""
    U: np.ndarray
    g_reduced: np.ndarray
    active: list[int]
    a: np.ndarray
    b: np.ndarray
    inv_rate_sum: np.ndarray
    E0_comp: float
    ell0: float
    ell_scale: float
    adjusted: bool = False

    @property
    def m(self) -> int:
        return int(self.U.shape[1])

    def harvest_coefficients(self, inst: Instance, k: int) -> np.ndarray:
        """Coefficients on the C parameters of node k's harvested energy."""
        return inst.T * inst.zeta[k] * inst.P_max * quadratic_coefficients(self.g_reduced[k], self.m)

    def covariance(self, C: np.ndarray, P_max: float) -> EnergyCovariance:
        Q = P_max * (self.U @ C @ self.U.conj().T)
        return EnergyCovariance(0.5 * (Q + Q.conj().T))


@dataclass
class RecoveryResult:
    """原始解恢复结果"""
    Q: EnergyCovariance
    ell: np.ndarray  # helpers only, (K,)
    ell0: float
    adjusted: bool
    stage1_bits: float
    sdp: RecoverySdp


def build_recovery_sdp(inst: Instance, rates: Sequence[RateTriple], ell0: float) -> RecoverySdp:
    """构建恢复 SDP"""
    U = reduce_subspace(inst.g)
    g_reduced = inst.g.conj() @ U
    g_reduced = g_reduced.conj()  # rows are U^H g_k

    active = [
        k for k in range(1, inst.K + 1)
        if rates[k - 1].positive and np.linalg.norm(inst.g[k]) > 0
    ]
    a = np.array([user_unit_energy(rates[k - 1], inst.helper(k)) for k in active])
    b = np.array([helper_unit_energy(rates[k - 1], inst.helper(k)) for k in active])
    inv_rate_sum = np.array([np.sum(1.0 / rates[k - 1].as_array()) for k in active])

    xi0, C0 = float(inst.xi[0]), float(inst.C[0])
    E0_comp = xi0 * C0**3 * ell0**3 / inst.T**2
    H0_max = inst.mrt_energy(0)
    adjusted = False
    if E0_comp >= H0_max:
        E0_comp = (1.0 - USER_MARGIN) * H0_max
        new_ell0 = (E0_comp * inst.T**2 / (xi0 * C0**3)) ** (1.0 / 3.0)
        logger.warning(
            "local bits %.6g need more energy than the user can harvest; reduced to %.6g",
            ell0, new_ell0,
        )
        ell0 = new_ell0
        adjusted = True

    return RecoverySdp(
        U=U,
        g_reduced=g_reduced,
        active=active,
        a=a,
        b=b,
        inv_rate_sum=inv_rate_sum,
        E0_comp=E0_comp,
        ell0=ell0,
        ell_scale=inst.B * inst.T,
        adjusted=adjusted,
    )


def _energy_rows(sdp: RecoverySdp, inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    m2 = sdp.m * sdp.m
    n_y = len(sdp.active)
    rows, rhs = [], []

    row = np.zeros(m2 + n_y)
    row[:m2] = -sdp.harvest_coefficients(inst, 0)
    row[m2:] = sdp.a * sdp.ell_scale
    rows.append(row)
    rhs.append(-sdp.E0_comp)

    for j, k in enumerate(sdp.active):
        row = np.zeros(m2 + n_y)
        row[:m2] = -sdp.harvest_coefficients(inst, k)
        row[m2 + j] = sdp.b[j] * sdp.ell_scale
        rows.append(row)
        rhs.append(0.0)

        row = np.zeros(m2 + n_y)
        row[m2 + j] = sdp.inv_rate_sum[j] * sdp.ell_scale
        rows.append(row)
        rhs.append(inst.T)

    row = np.zeros(m2 + n_y)
    row[:m2] = trace_coefficients(sdp.m)
    rows.append(row)
    rhs.append(1.0)
    return np.array(rows), np.array(rhs)


def solve_recovery_sdp(
    dp_opt: DualPoint,
    inst: Instance,
    ell0_opt: float,
    rates: Optional[Sequence[RateTriple]] = None,
    settings: Optional[BarrierSettings] = None,
) -> RecoveryResult:
    """原始解恢复

    Recover (Q, ell_1..ell_K) at the optimal rates, then raise ell0 to
    use all of the user's remaining harvested energy."""
    if rates is None:
        rates = [
            optimal_rates(float(dp_opt.lam[0]), float(dp_opt.lam[k]), float(dp_opt.mu[k - 1]), inst.helper(k))
            for k in range(1, inst.K + 1)
        ]
    if len(rates) != inst.K:
        raise InputError(f"expected {inst.K} rate triples, got {len(rates)}")

    if inst.P_max == 0 or np.linalg.norm(inst.g) == 0:
        return _dark_recovery(inst)

    sdp = build_recovery_sdp(inst, rates, ell0_opt)
    m2 = sdp.m * sdp.m
    n_y = len(sdp.active)
    G, h = _energy_rows(sdp, inst)
    H0_coeff = sdp.harvest_coefficients(inst, 0)
    E_scale = max(inst.mrt_energy(0), 1e-300)

    stage1_bits = 0.0
    warm: Optional[np.ndarray] = None
    try:
        if n_y:
            c1 = np.zeros(m2 + n_y)
            c1[m2:] = -1.0
            res1 = solve_lmi(LmiProblem(sdp.m, n_y, 0, c1, G, h), settings=settings)
            y1 = res1.y
            stage1_bits = float(np.sum(y1))
            warm = res1.z.copy()
            warm[m2:] *= 1.0 - 0.5 * OPT_KEEP
            keep_row = np.zeros(m2 + n_y)
            keep_row[m2:] = -1.0
            G = np.vstack([G, keep_row])
            h = np.concatenate([h, [-(1.0 - OPT_KEEP) * stage1_bits]])

        c2 = np.zeros(m2 + n_y)
        c2[:m2] = -H0_coeff / E_scale
        c2[m2:] = sdp.a * sdp.ell_scale / E_scale
        res2 = solve_lmi(LmiProblem(sdp.m, n_y, 0, c2, G, h), z0=warm, settings=settings)
    except InfeasibleError as exc:
        raise RecoveryError(f"recovery SDP has no strictly feasible point: {exc}") from exc

    ell = np.zeros(inst.K)
    for j, k in enumerate(sdp.active):
        ell[k - 1] = max(float(res2.y[j]), 0.0) * sdp.ell_scale
    ell[ell < ZERO_BITS * sdp.ell_scale] = 0.0

    Q = sdp.covariance(res2.C, inst.P_max)
    ell0 = _tightened_local_bits(inst, Q, ell, rates, sdp.ell0)
    logger.info(
        "recovered %d active helper(s): helper bits %.6g, local bits %.6g -> %.6g",
        n_y, float(np.sum(ell)), ell0_opt, ell0,
    )
    return RecoveryResult(
        Q=Q,
        ell=ell,
        ell0=ell0,
        adjusted=sdp.adjusted,
        stage1_bits=stage1_bits * sdp.ell_scale,
        sdp=sdp,
    )


def _dark_recovery(inst: Instance) -> RecoveryResult:
    """No energy can be delivered: every node stays idle."""
    U = np.zeros((inst.N, 0), dtype=complex)
    sdp = RecoverySdp(
        U=U, g_reduced=np.zeros((inst.K + 1, 0)), active=[], a=np.zeros(0), b=np.zeros(0),
        inv_rate_sum=np.zeros(0), E0_comp=0.0, ell0=0.0, ell_scale=inst.B * inst.T,
    )
    return RecoveryResult(
        Q=EnergyCovariance.zeros(inst.N), ell=np.zeros(inst.K), ell0=0.0,
        adjusted=False, stage1_bits=0.0, sdp=sdp,
    )


def _tightened_local_bits(
    inst: Instance,
    Q: EnergyCovariance,
    ell: np.ndarray,
    rates: Sequence[RateTriple],
    floor: float,
) -> float:
    """Largest ell0 the user's leftover harvested energy can compute."""
    harvest = inst.T * inst.zeta[0] * float(np.vdot(inst.g[0], Q.Q @ inst.g[0]).real)
    tx = sum(
        user_unit_energy(rates[k - 1], inst.helper(k)) * ell[k - 1]
        for k in range(1, inst.K + 1) if ell[k - 1] > 0
    )
    leftover = (harvest - tx) * (1.0 - 1e-12)
    if leftover <= 0:
        return 0.0
    ell0 = (leftover * inst.T**2 / (inst.xi[0] * inst.C[0] ** 3)) ** (1.0 / 3.0)
    if ell0 < floor * (1.0 - 1e-6):
        logger.debug("tightened local bits %.9g below dual value %.9g", ell0, floor)
    return float(ell0)


def assemble_solution(
    inst: Instance,
    Q: EnergyCovariance,
    ell0: float,
    ell: np.ndarray,
    rates: Sequence[RateTriple],
) -> Solution:
    """组装原始解

    Solution with t_k,i = ell_k / r_k,i (zero for idle helpers).
    """
    ell = np.asarray(ell, dtype=float).reshape(-1)
    t = np.zeros((inst.K, 3))
    for k in range(1, inst.K + 1):
        if ell[k - 1] > 0:
            r = rates[k - 1].as_array()
            t[k - 1] = np.minimum(ell[k - 1] / r, inst.T)
    return Solution.build(inst, np.concatenate([[ell0], ell]), t, Q)


def duality_gap(sol: Solution, dual_value: float) -> float:
    """对偶间隙"""
    return float((dual_value - sol.objective) / max(1.0, dual_value))
