#!/usr/bin/env python3
"""
Dual function of the rate maximisation problem.

For a dual point (lambda, mu, rho) the Lagrangian separates into K+2
independent subproblems: the energy covariance (closed form, Q* = 0 when
F(lambda, rho) is negative semidefinite), the user's local bits (closed
form), and one problem per helper whose slot durations follow from
Lambert-W rates.

Dual vectors are laid out as [lambda_0..lambda_K, mu_1..mu_K, rho].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..constants import LAMBDA_MIN, SPECTRAL_CEILING
from ..errors import InputError
from .model import LN2, EnergyCovariance, HelperParams, Instance, harvested_energy
from .model import helper_energy_demand, user_energy_demand
from .special_fn import one_plus_w

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
PSD_CUT_TOL = 1e-12
EXP_CAP = 700.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualPoint:
    """对偶变量"""
    lam: np.ndarray
    mu: np.ndarray
    rho: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.size != lam.size - 1:
            raise InputError(f"mu must have {lam.size - 1} entries, got {mu.size}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def K(self) -> int:
        return int(self.mu.size)

    @property
    def dim(self) -> int:
        return 2 * self.K + 2

    @classmethod
    def from_vector(cls, vec, K: int) -> "DualPoint":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != 2 * K + 2:
            raise InputError(f"dual vector must have {2 * K + 2} entries, got {vec.size}")
        return cls(lam=vec[: K + 1], mu=vec[K + 1: 2 * K + 1], rho=vec[-1])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.lam, self.mu, [self.rho]])

    def in_box(self, lambda_min: float = LAMBDA_MIN) -> bool:
        return bool(np.all(self.lam >= lambda_min) and np.all(self.mu >= 0) and self.rho >= 0)


@dataclass(frozen=True)
class RateTriple:
    """三个时隙的速率

    Rate-optimal offload, compute and result-return rates (bits/s).
    """
    r1: float
    r2: float
    r3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3])

    @property
    def positive(self) -> bool:
        return self.r1 > 0 and self.r2 > 0 and self.r3 > 0

    def bottleneck(self, T: float) -> float:
        """Bits the slowest slot can carry in a full block."""
        return float(min(self.r1, self.r2, self.r3) * T)


@dataclass(frozen=True)
class HelperEval:
    """助手子问题结果

    Maximiser of helper k's Lagrangian subproblem.
    """
    k: int
    rates: RateTriple
    M: float
    ell: float
    t: np.ndarray
    value: float


@dataclass(frozen=True)
class DualEval:
    """对偶函数求值结果"""
    value: float
    ell0: float
    local_value: float
    helpers: tuple[HelperEval, ...]
    Q: EnergyCovariance

    @property
    def ell(self) -> np.ndarray:
        return np.array([self.ell0] + [h.ell for h in self.helpers])

    @property
    def t(self) -> np.ndarray:
        if not self.helpers:
            return np.zeros((0, 3))
        return np.vstack([h.t for h in self.helpers])


@dataclass(frozen=True)
class Cut:
    """可行性割平面

    Feasibility cut: kind is 'psd' or 'box', index names the violated coordinate.
    """
    kind: str
    index: int
    gradient: np.ndarray
    violation: float


# ---------------------------------------------------------------------------
# Covariance subproblem
# ---------------------------------------------------------------------------

def psd_matrix_F(dp: DualPoint, inst: Instance) -> np.ndarray:
    """对偶半正定约束矩阵

    F(lambda, rho) = sum_k lambda_k T zeta_k g_k g_k^H - rho I.
    """
    if dp.K != inst.K:
        raise InputError(f"dual point has K={dp.K}, instance has K={inst.K}")
    weights = dp.lam * inst.T * inst.zeta
    G = inst.g
    F = (G.T * weights) @ G.conj()
    F = 0.5 * (F + F.conj().T)
    F -= dp.rho * np.eye(inst.N)
    return F


def _top_eigen(F: np.ndarray) -> tuple[float, np.ndarray]:
    w, V = np.linalg.eigh(F)
    return float(w[-1]), V[:, -1]


def _psd_scale(dp: DualPoint, inst: Instance) -> float:
    gains = np.sum(np.abs(inst.g) ** 2, axis=1)
    return float(np.sum(np.abs(dp.lam) * inst.T * inst.zeta * gains) + abs(dp.rho))


# ---------------------------------------------------------------------------
# User subproblem
# ---------------------------------------------------------------------------

def optimal_local_bits(lambda0: float, inst: Instance, lambda_min: float = LAMBDA_MIN) -> float:
    """本地计算最优比特数

    Maximiser of ell0 - lambda0 xi0 C0^3 ell0^3 / T^2 over ell0 >= 0.
    """
    if not lambda0 >= lambda_min:
        raise InputError(f"lambda0={lambda0!r} is below lambda_min={lambda_min!r}")
    return float(inst.T / math.sqrt(3.0 * lambda0 * inst.xi[0] * inst.C[0] ** 3))


# ---------------------------------------------------------------------------
# Helper subproblem
# ---------------------------------------------------------------------------

def optimal_rates(lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams) -> RateTriple:
    """最优时隙速率

    Rates at which each slot's duration is optimal for a fixed bit count.
    """
    if mu_k <= 0:
        return RateTriple(0.0, 0.0, 0.0)
    r1 = hp.B / LN2 * one_plus_w(mu_k * hp.h / (lambda0 * hp.sigma2))
    r2 = (mu_k / (2.0 * lambda_k * hp.xi)) ** (1.0 / 3.0) / hp.C
    r3 = hp.B / (hp.beta * LN2) * one_plus_w(mu_k * hp.h / (lambda_k * hp.sigma2_user))
    return RateTriple(float(r1), float(r2), float(r3))


def _unit_costs(r: RateTriple, lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams) -> np.ndarray:
    """Per-bit Lagrangian cost of each slot when it runs at its optimal rate."""
    m1 = lambda0 * hp.sigma2 / (hp.h * r.r1) * math.expm1(r.r1 / hp.B * LN2) + mu_k / r.r1
    m2 = lambda_k * hp.xi * hp.C**3 * r.r2**2 + mu_k / r.r2
    m3 = lambda_k * hp.sigma2_user / (hp.h * r.r3) * math.expm1(hp.beta * r.r3 / hp.B * LN2) + mu_k / r.r3
    return np.array([m1, m2, m3])


def helper_gain_coefficient(r: RateTriple, lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams) -> float:
    """每比特卸载净收益

    Net Lagrangian gain per offloaded bit; -inf when a slot has zero rate.
    """
    if not r.positive:
        return -math.inf
    return float(1.0 - np.sum(_unit_costs(r, lambda0, lambda_k, mu_k, hp)))


def optimal_helper_bits(M: float, r: RateTriple, T: float) -> float:
    """助手最优比特数"""
    if M <= TIE_TOL:
        return 0.0
    return r.bottleneck(T)


class _HelperCosts:
    """Slot costs phi_i(ell, t) + mu t of one helper at fixed multipliers."""

    def __init__(self, lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams):
        self.hp = hp
        self.mu = mu_k
        self.a1 = lambda0 * hp.sigma2 / hp.h
        self.c2 = lambda_k * hp.xi * hp.C**3
        self.a3 = lambda_k * hp.sigma2_user / hp.h

    def slot_cost(self, i: int, ell: float, t: float) -> float:
        hp = self.hp
        if t <= 0:
            return 0.0 if ell == 0 else math.inf
        if i == 0:
            energy = self.a1 * t * math.expm1(min(ell / (t * hp.B) * LN2, EXP_CAP))
        elif i == 1:
            energy = self.c2 * ell**3 / t**2
        else:
            energy = self.a3 * t * math.expm1(min(hp.beta * ell / (t * hp.B) * LN2, EXP_CAP))
        return energy + self.mu * t

    def full_block_marginal(self, i: int, ell: float) -> float:
        """d/d ell of slot i's cost with its duration pinned to T."""
        hp = self.hp
        if i == 0:
            return self.a1 * LN2 / hp.B * math.exp(min(ell / (hp.T * hp.B) * LN2, EXP_CAP))
        if i == 1:
            return 3.0 * self.c2 * ell**2 / hp.T**2
        return self.a3 * hp.beta * LN2 / hp.B * math.exp(min(hp.beta * ell / (hp.T * hp.B) * LN2, EXP_CAP))


def solve_helper(lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams) -> HelperEval:
    """求解助手子问题

    Exact maximiser of helper k's subproblem over 0 <= t_i <= T, ell >= 0.

    Below min_i r_i T every slot runs at its optimal rate and the value is
    linear in ell with slope M. Beyond that kink the slots that would need
    more than T are pinned to T and the (concave) value is maximised by a
    root search on its derivative.
    """
    rates = optimal_rates(lambda0, lambda_k, mu_k, hp)
    M = helper_gain_coefficient(rates, lambda0, lambda_k, mu_k, hp)
    costs = _HelperCosts(lambda0, lambda_k, mu_k, hp)
    r = rates.as_array()
    unit = _unit_costs(rates, lambda0, lambda_k, mu_k, hp) if rates.positive else np.zeros(3)

    def slope(ell: float) -> float:
        d = 1.0
        for i in range(3):
            if r[i] > 0 and ell < r[i] * hp.T:
                d -= unit[i]
            else:
                d -= costs.full_block_marginal(i, ell)
        return d

    kink = rates.bottleneck(hp.T)
    ell = optimal_helper_bits(M, rates, hp.T)
    if ell == 0.0 and kink == 0.0 and slope(0.0) > TIE_TOL:
        ell = 0.0
        start = 0.0
    elif ell == 0.0:
        start = None
    else:
        start = kink

    if start is not None:
        hi = max(2.0 * start, SPECTRAL_CEILING * hp.B * hp.T)
        for _ in range(2000):
            if slope(hi) <= 0:
                break
            hi *= 2.0
        if slope(start) <= 0:
            ell = start
        else:
            ell = float(brentq(slope, start, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps))

    if ell <= 0:
        return HelperEval(k=hp.k, rates=rates, M=M, ell=0.0, t=np.zeros(3), value=0.0)

    t = np.array([min(ell / r[i], hp.T) if r[i] > 0 else hp.T for i in range(3)])
    value = ell - sum(costs.slot_cost(i, ell, t[i]) for i in range(3))
    return HelperEval(k=hp.k, rates=rates, M=M, ell=float(ell), t=t, value=float(value))


# ---------------------------------------------------------------------------
# Dual function, subgradients and cuts
# ---------------------------------------------------------------------------

def eval_dual(dp: DualPoint, inst: Instance, lambda_min: float = LAMBDA_MIN) -> DualEval:
    """对偶函数求值"""
    F = psd_matrix_F(dp, inst)
    top, _ = _top_eigen(F)
    if top > 1e-10 * max(_psd_scale(dp, inst), 1e-300):
        raise InputError(f"F(lambda, rho) is not negative semidefinite (top eigenvalue {top:.3e})")
    if not dp.in_box(lambda_min):
        raise InputError("dual point lies outside lambda >= lambda_min, mu >= 0, rho >= 0")

    lam0 = float(dp.lam[0])
    ell0 = optimal_local_bits(lam0, inst, lambda_min)
    local_value = ell0 - lam0 * inst.xi[0] * inst.C[0] ** 3 * ell0**3 / inst.T**2

    helpers = tuple(
        solve_helper(lam0, float(dp.lam[k]), float(dp.mu[k - 1]), inst.helper(k))
        for k in range(1, inst.K + 1)
    )
    value = dp.rho * inst.P_max + float(np.sum(dp.mu)) * inst.T + local_value
    value += sum(h.value for h in helpers)
    return DualEval(
        value=float(value),
        ell0=ell0,
        local_value=float(local_value),
        helpers=helpers,
        Q=EnergyCovariance.zeros(inst.N),
    )


def dual_subgradient(de: DualEval, dp: DualPoint, inst: Instance) -> np.ndarray:
    """对偶次梯度

    Constraint slacks at the Lagrangian maximisers.
    """
    ell = de.ell
    t = de.t
    grad = np.zeros(dp.dim)
    grad[0] = harvested_energy(de.Q, inst.g[0], float(inst.zeta[0]), inst.T) - user_energy_demand(inst, ell, t)
    for k in range(1, inst.K + 1):
        harvest = harvested_energy(de.Q, inst.g[k], float(inst.zeta[k]), inst.T)
        grad[k] = harvest - helper_energy_demand(inst, k, float(ell[k]), t[k - 1])
        grad[inst.K + k] = inst.T - float(np.sum(t[k - 1]))
    grad[-1] = inst.P_max - de.Q.trace
    return grad


def feasibility_cut(dp: DualPoint, inst: Instance, lambda_min: float = LAMBDA_MIN) -> Optional[Cut]:
    """对偶可行域割平面

    Cut separating dp from the dual domain, or None when dp is inside.
    """
    F = psd_matrix_F(dp, inst)
    top, v = _top_eigen(F)
    if top > PSD_CUT_TOL * max(_psd_scale(dp, inst), 1e-300):
        grad = np.zeros(dp.dim)
        grad[: inst.K + 1] = inst.T * inst.zeta * np.abs(inst.g.conj() @ v) ** 2
        grad[-1] = -1.0
        return Cut(kind="psd", index=dp.dim - 1, gradient=grad, violation=top)

    lam_gap = lambda_min - dp.lam
    mu_gap = -dp.mu
    candidates = [(lam_gap[i], i) for i in range(dp.lam.size)]
    candidates += [(mu_gap[i], dp.lam.size + i) for i in range(dp.mu.size)]
    candidates.append((-dp.rho, dp.dim - 1))
    worst, index = max(candidates)
    if worst > 0:
        grad = np.zeros(dp.dim)
        grad[index] = -1.0
        return Cut(kind="box", index=index, gradient=grad, violation=float(worst))
    return None


def reference_scales(inst: Instance) -> np.ndarray:
    """对偶变量参考量级

    Per-coordinate magnitudes of a dual vector.

    lambda_k is scaled by the multiplier at which node k's stand-alone local
    computing (all power beamed at it) would be optimal, mu_k by the bits per
    second of the faster of user and helper, rho so that F <= 0 at the
    reference point.
    """
    gains = np.sum(np.abs(inst.g) ** 2, axis=1)
    alone = np.cbrt(inst.T**3 * inst.zeta * inst.P_max * gains / (inst.xi * inst.C**3))
    fallback = float(np.max(alone)) if np.max(alone) > 0 else inst.B * inst.T
    alone = np.where(alone > 0, alone, fallback)

    lam_ref = inst.T**2 / (3.0 * inst.xi * inst.C**3 * alone**2)
    mu_ref = np.maximum(alone[0], alone[1:]) / inst.T
    F_ref = psd_matrix_F(DualPoint(lam=lam_ref, mu=np.zeros(inst.K), rho=0.0), inst)
    top = float(np.linalg.eigvalsh(F_ref)[-1])
    rho_ref = 1.01 * top if top > 0 else 1.0
    return np.concatenate([lam_ref, mu_ref, [rho_ref]])


# ---------------------------------------------------------------------------
# Stationarity residuals
# ---------------------------------------------------------------------------

def rate_stationarity_residuals(
    r: RateTriple, lambda0: float, lambda_k: float, mu_k: float, hp: HelperParams
) -> np.ndarray:
    """速率驻点残差

    Relative residuals of the slot-duration optimality conditions.

    For slot i with energy price phi_i(r) per unit time, the optimal rate
    satisfies phi_i(r) - r phi_i'(r) + mu = 0; residuals are divided by mu.
    """
    if mu_k <= 0:
        return np.zeros(3)
    u1 = r.r1 * LN2 / hp.B
    u3 = hp.beta * r.r3 * LN2 / hp.B
    a1 = lambda0 * hp.sigma2 / hp.h
    a3 = lambda_k * hp.sigma2_user / hp.h
    res1 = mu_k - a1 * ((u1 - 1.0) * math.exp(u1) + 1.0)
    res2 = mu_k - 2.0 * lambda_k * hp.xi * hp.C**3 * r.r2**3
    res3 = mu_k - a3 * ((u3 - 1.0) * math.exp(u3) + 1.0)
    return np.abs(np.array([res1, res2, res3])) / mu_k


def bits_stationarity_residual(M: float, ell_k: float) -> float:
    """比特驻点残差

    Residual of the per-helper bit optimality condition.

    A helper carrying bits must break even (M = 0); an idle helper must not
    be profitable (M <= 0).
    """
    if not math.isfinite(M):
        return 0.0 if ell_k <= 0 else math.inf
    return abs(M) if ell_k > 0 else max(0.0, M)
