#!/usr/bin/env python3
"""
KKT 精化

Polishes a recovered solution. With the set of helpers that carry bits
fixed, the computation rate problem in (Q, ell, t) is convex and smooth
apart from the PSD block, so a log-barrier path on the exact energy terms
drives it to the optimum at barrier precision:

    max  ell_0 + sum_j ell_j
    s.t. xi_0 C_0^3 ell_0^3 / T^2 + sum_j E_off(ell_j, t_j1) <= T zeta_0 g_0^H Q g_0
         E_ret(ell_j, t_j3) + xi_j C_j^3 ell_j^3 / t_j2^2     <= T zeta_j g_j^H Q g_j
         t_j1 + t_j2 + t_j3 <= T,   tr(Q) <= P_max,   Q >= 0

The multipliers are then read off the stationarity conditions of the
polished point (local bits, offload slot, compute slot), which leaves
the remaining optimality conditions as a check of its accuracy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..constants import LAMBDA_MIN
from ..errors import InputError, RecoveryError
from .barrier_sdp import (
    BarrierSettings,
    LmiBarrier,
    LmiProblem,
    follow_central_path,
    pack_hermitian,
    quadratic_coefficients,
    trace_coefficients,
    unpack_hermitian,
)
from .dual_core import DualPoint, psd_matrix_F
from .model import LN2, EnergyCovariance, Instance, Solution, harvested_energy, offload_tx_energy
from .primal_recovery import reduce_subspace

logger = logging.getLogger(__name__)

EXP_CAP = 700.0
IDLE_BITS = 1e-9
RHO_MARGIN = 1e-12

# strictly feasible start from a (tolerance-)feasible solution
SHRINK_BITS = 0.9
SHRINK_TIME = 0.99
SHRINK_C = 0.98
LOCAL_SHARE = 0.9
TOPUP_MARGIN = 1e-12


@dataclass
class RefinedSolution:
    """精化结果"""
    solution: Solution
    dual_point: DualPoint
    duality_measure: float
    newton_steps: int
    stalled: bool


@dataclass(frozen=True)
class _ExpTerm:
    """a v (exp(c u / v) - 1) on scaled bits u and scaled duration v."""
    iu: int
    iv: int
    a: float
    c: float

    def add(self, z: np.ndarray, g: Optional[np.ndarray], H: Optional[np.ndarray]) -> float:
        u, v = z[self.iu], z[self.iv]
        s = self.c * u / v
        if s > EXP_CAP:
            return math.inf
        if g is not None:
            a, c, e = self.a, self.c, math.exp(s)
            g[self.iu] += a * c * e
            g[self.iv] += a * (math.expm1(s) - s * e)
            H[self.iu, self.iu] += a * c * c * e / v
            H[self.iu, self.iv] -= a * c * s * e / v
            H[self.iv, self.iu] -= a * c * s * e / v
            H[self.iv, self.iv] += a * s * s * e / v
        return self.a * v * math.expm1(s)


@dataclass(frozen=True)
class _CubeTerm:
    """k u^3 / v^2; a missing duration index means the whole block (v = 1)."""
    iu: int
    iv: Optional[int]
    k: float

    def add(self, z: np.ndarray, g: Optional[np.ndarray], H: Optional[np.ndarray]) -> float:
        u = z[self.iu]
        v = z[self.iv] if self.iv is not None else 1.0
        k = self.k
        if g is not None:
            g[self.iu] += 3.0 * k * u**2 / v**2
            H[self.iu, self.iu] += 6.0 * k * u / v**2
            if self.iv is not None:
                g[self.iv] -= 2.0 * k * u**3 / v**3
                H[self.iu, self.iv] -= 6.0 * k * u**2 / v**3
                H[self.iv, self.iu] -= 6.0 * k * u**2 / v**3
                H[self.iv, self.iv] += 6.0 * k * u**3 / v**4
        return k * u**3 / v**2


class _EnergyRow:
    """(demand(z) - harvest . x) / scale <= 0 for one node."""

    def __init__(self, terms: list, harvest: np.ndarray, scale: float, n: int):
        self.terms = terms
        self.harvest = harvest
        self.scale = scale
        self.n = n

    def evaluate(self, z: np.ndarray, derivatives: bool) -> tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
        g = np.zeros(self.n) if derivatives else None
        H = np.zeros((self.n, self.n)) if derivatives else None
        demand = 0.0
        for term in self.terms:
            demand += term.add(z, g, H)
            if not math.isfinite(demand):
                return math.inf, None, None
        m2 = self.harvest.size
        f = (demand - float(self.harvest @ z[:m2])) / self.scale
        if g is not None:
            g[:m2] -= self.harvest
            g /= self.scale
            H /= self.scale
        return f, g, H


class _EnergyBarrier:
    """LMI barrier plus -log(-f) for every node's energy row."""

    def __init__(self, base: LmiBarrier, rows: list[_EnergyRow]):
        self.base = base
        self.rows = rows

    def value(self, z: np.ndarray) -> float:
        total = self.base.value(z)
        if not math.isfinite(total):
            return math.inf
        for row in self.rows:
            f, _, _ = row.evaluate(z, False)
            if not f < 0.0:
                return math.inf
            total -= math.log(-f)
        return total

    def derivatives(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad, hess = self.base.derivatives(z)
        for row in self.rows:
            f, g, H = row.evaluate(z, True)
            grad = grad + g / -f
            hess = hess + np.outer(g, g) / f**2 + H / -f
        return grad, 0.5 * (hess + hess.T)


def multipliers_from_primal(inst: Instance, sol: Solution, lambda_min: float = LAMBDA_MIN) -> DualPoint:
    """由原始解的驻点条件读出对偶变量

    lambda_0 prices the user's local bits, mu_k the offload slot and
    lambda_k the compute slot; rho is the top eigenvalue of
    sum_k lambda_k T zeta_k g_k g_k^H. Idle helpers get (lambda_min, 0).
    """
    ell0 = float(sol.ell[0])
    if not ell0 > 0:
        raise InputError("local bits must be positive to price the user's energy")
    xi0, C0 = float(inst.xi[0]), float(inst.C[0])
    lam = np.full(inst.K + 1, float(lambda_min))
    mu = np.zeros(inst.K)
    lam[0] = max(inst.T**2 / (3.0 * xi0 * C0**3 * ell0**2), lambda_min)

    for k in range(1, inst.K + 1):
        ell_k = float(sol.ell[k])
        t_k = sol.t[k - 1]
        if ell_k <= 0 or not np.all(t_k > 0):
            continue
        hp = inst.helper(k)
        u1 = ell_k / t_k[0] * LN2 / hp.B
        mu_k = lam[0] * hp.sigma2 / hp.h * (u1 * math.exp(u1) - math.expm1(u1))
        lam_k = mu_k * t_k[1] ** 3 / (2.0 * hp.xi * hp.C**3 * ell_k**3)
        mu[k - 1] = mu_k
        lam[k] = max(lam_k, lambda_min)

    A = psd_matrix_F(DualPoint(lam=lam, mu=mu, rho=0.0), inst)
    top = float(np.linalg.eigvalsh(A)[-1])
    return DualPoint(lam=lam, mu=mu, rho=max(top, 0.0) * (1.0 + RHO_MARGIN))


def refine_solution(
    inst: Instance,
    sol: Solution,
    lambda_min: float = LAMBDA_MIN,
    settings: Optional[BarrierSettings] = None,
) -> RefinedSolution:
    """在承载比特的助手集合上精化解，并给出匹配的对偶点"""
    if inst.P_max == 0 or not np.any(inst.g):
        raise RecoveryError("no energy reaches any node")
    T, P = float(inst.T), float(inst.P_max)
    Ls = inst.B * T
    U = reduce_subspace(inst.g)
    m = U.shape[1]
    m2 = m * m
    a_red = (U.conj().T @ inst.g.T).T

    active = [k for k in range(1, inst.K + 1) if sol.ell[k] > 0 and np.all(sol.t[k - 1] > 0)]
    n_y = 1 + 4 * len(active)
    n = m2 + n_y
    iu0 = m2

    def slot(j: int, i: int) -> int:
        return m2 + 1 + 4 * j + i

    def harvest(k: int) -> np.ndarray:
        return T * inst.zeta[k] * P * quadratic_coefficients(a_red[k], m)

    def scale(k: int) -> float:
        e = inst.mrt_energy(k)
        if not e > 0:
            raise RecoveryError(f"node {k} cannot harvest any energy")
        return e

    xi0, C0 = float(inst.xi[0]), float(inst.C[0])
    user_terms: list = [_CubeTerm(iu0, None, xi0 * C0**3 * Ls**3 / T**2)]
    rows: list[_EnergyRow] = []
    for j, k in enumerate(active):
        hp = inst.helper(k)
        user_terms.append(_ExpTerm(slot(j, 0), slot(j, 1), T * hp.sigma2 / hp.h, LN2 * Ls / (hp.B * T)))
        rows.append(_EnergyRow(
            [
                _ExpTerm(slot(j, 0), slot(j, 3), T * hp.sigma2_user / hp.h, hp.beta * LN2 * Ls / (hp.B * T)),
                _CubeTerm(slot(j, 0), slot(j, 2), hp.xi * hp.C**3 * Ls**3 / T**2),
            ],
            harvest(k), scale(k), n,
        ))
    rows.insert(0, _EnergyRow(user_terms, harvest(0), scale(0), n))

    G, h = [], []
    for j in range(len(active)):
        row = np.zeros(n)
        row[[slot(j, 1), slot(j, 2), slot(j, 3)]] = 1.0
        G.append(row)
        h.append(1.0)
    row = np.zeros(n)
    row[:m2] = trace_coefficients(m)
    G.append(row)
    h.append(1.0)

    c = np.zeros(n)
    c[iu0] = -1.0
    for j in range(len(active)):
        c[slot(j, 0)] = -1.0
    problem = LmiProblem(m, n_y, 0, c, np.array(G), np.array(h))
    barrier = _EnergyBarrier(LmiBarrier(problem), rows)
    degree = m + n_y + len(h) + len(rows)

    z0 = _start_point(inst, sol, U, active, rows[0], n, slot)
    if not math.isfinite(barrier.value(z0)):
        raise RecoveryError("recovered solution gives no strictly feasible start")

    res = follow_central_path(problem, barrier, degree, z0, settings)

    C = unpack_hermitian(res.z[:m2], m)
    Q = P * (U @ C @ U.conj().T)
    ell = np.zeros(inst.K + 1)
    t = np.zeros((inst.K, 3))
    ell[0] = Ls * res.z[iu0]
    for j, k in enumerate(active):
        bits = Ls * res.z[slot(j, 0)]
        if bits < IDLE_BITS * Ls:
            logger.debug("helper %d carries %.3g bits after refinement; left idle", k, bits)
            continue
        ell[k] = bits
        t[k - 1] = T * res.z[[slot(j, 1), slot(j, 2), slot(j, 3)]]
    Q = 0.5 * (Q + Q.conj().T)
    ell[0] = _top_up_local_bits(inst, Q, ell, t)
    refined = Solution.build(inst, ell, t, EnergyCovariance(Q))
    dp = multipliers_from_primal(inst, refined, lambda_min)
    logger.info(
        "refined to %.12g bits (measure %.3g, %d Newton steps)",
        refined.objective, res.duality_measure, res.newton_steps,
    )
    return RefinedSolution(
        solution=refined,
        dual_point=dp,
        duality_measure=res.duality_measure,
        newton_steps=res.newton_steps,
        stalled=res.stalled,
    )


def _top_up_local_bits(inst: Instance, Q: np.ndarray, ell: np.ndarray, t: np.ndarray) -> float:
    """Scale Q to the full power budget and spend the user's leftover energy on local bits."""
    trace = float(np.trace(Q).real)
    if trace > 0:
        Q *= inst.P_max / trace
    spare = harvested_energy(Q, inst.g[0], float(inst.zeta[0]), inst.T)
    for k in range(1, inst.K + 1):
        if ell[k] > 0:
            hp = inst.helper(k)
            spare -= offload_tx_energy(ell[k], t[k - 1, 0], hp.B, hp.h, hp.sigma2)
    if not spare > 0:
        return float(ell[0])
    best = np.cbrt(spare * inst.T**2 / (float(inst.xi[0]) * float(inst.C[0]) ** 3)) * (1.0 - TOPUP_MARGIN)
    return float(max(ell[0], best))


def _start_point(inst: Instance, sol: Solution, U: np.ndarray, active: list[int],
                 user_row: _EnergyRow, n: int, slot) -> np.ndarray:
    """Shrink bits, durations and the covariance into the strict interior,
    then spend most of the user's spare energy on local bits."""
    T, Ls = float(inst.T), inst.B * float(inst.T)
    m = U.shape[1]
    C = U.conj().T @ sol.Q.Q @ U / inst.P_max
    C = SHRINK_C * 0.5 * (C + C.conj().T) + (1.0 - SHRINK_C) / 2.0 * np.eye(m) / m

    z = np.zeros(n)
    z[: m * m] = pack_hermitian(C)
    for j, k in enumerate(active):
        z[slot(j, 0)] = SHRINK_BITS * sol.ell[k] / Ls
        z[[slot(j, 1), slot(j, 2), slot(j, 3)]] = SHRINK_TIME * sol.t[k - 1] / T

    # user row without local bits: offload demand minus harvest
    z[m * m] = 0.0
    spare, _, _ = user_row.evaluate(z, False)
    spare = -spare * user_row.scale
    if not spare > 0:
        raise RecoveryError("the user has no spare energy at the refinement start")
    xi0, C0 = float(inst.xi[0]), float(inst.C[0])
    z[m * m] = np.cbrt(LOCAL_SHARE * spare * T**2 / (xi0 * C0**3)) / Ls
    return z
