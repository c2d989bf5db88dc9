#!/usr/bin/env python3
"""
独立校验工具

- ``brute_force_small``: exhaustive search for one-helper instances that
  shares nothing with the dual machinery except the energy model.
- ``kkt_residuals``: optimality residuals of a primal-dual pair.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..constants import LAMBDA_MIN, SPECTRAL_CEILING
from ..errors import FeasibilityError, InputError
from .dual_core import (
    DualPoint,
    RateTriple,
    _psd_scale,
    bits_stationarity_residual,
    helper_gain_coefficient,
    optimal_rates,
    psd_matrix_F,
    rate_stationarity_residuals,
)
from .model import (
    LN2,
    EnergyCovariance,
    Instance,
    Solution,
    check_feasible,
    helper_energy_demand,
    offload_tx_energy,
)

logger = logging.getLogger(__name__)

BISECT_STEPS = 64
GOLDEN_STEPS = 64
CHUNK_PAIRS = 2000
BEAM_MARGIN = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Brute force (K = 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """穷举搜索结果"""
    solution: Solution
    objective: float
    theta: float
    candidates: int


@dataclass(frozen=True)
class EnergyFrontier:
    """收集能量的帕累托边界

    Pareto frontier of (user, helper) harvested energy.

    Traced by rank-one beams v(theta) = cos(theta) e1 + sin(theta) e2 with
    e1 along g0 (phase-aligned with g1) and e2 the unit part of g1
    orthogonal to it; theta runs from 0 (all power on the user) to
    ``theta_max`` (all power on the helper).
    """
    user_peak: float
    c1: float
    b1: float
    b2: float
    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def of(cls, inst: Instance) -> "EnergyFrontier":
        g0, g1 = inst.g[0], inst.g[1]
        n0 = float(np.linalg.norm(g0))
        if n0 == 0.0:
            raise InputError("the user's channel is zero")
        e1 = g0 / n0
        b1 = np.vdot(e1, g1)
        resid = g1 - b1 * e1
        b2 = float(np.linalg.norm(resid))
        e2 = resid / b2 if b2 > 1e-300 else np.zeros_like(g0)
        phase = np.exp(1j * np.angle(b1)) if abs(b1) > 0 else 1.0
        return cls(
            user_peak=inst.mrt_energy(0),
            c1=inst.T * inst.zeta[1] * inst.P_max,
            b1=float(abs(b1)),
            b2=b2,
            e1=phase * e1,
            e2=e2,
        )

    @property
    def theta_max(self) -> float:
        return math.atan2(self.b2, self.b1)

    def user_energy(self, theta):
        return self.user_peak * np.cos(theta) ** 2

    def helper_energy(self, theta):
        return self.c1 * (np.cos(theta) * self.b1 + np.sin(theta) * self.b2) ** 2

    def angle_for(self, energy):
        """Smallest beam angle giving the helper ``energy``; nan beyond its MRT energy."""
        energy = np.asarray(energy, dtype=float)
        R = math.hypot(self.b1, self.b2)
        if R == 0.0:
            return np.where(energy <= 0.0, 0.0, np.nan)
        with np.errstate(invalid="ignore"):
            ratio = np.sqrt(np.maximum(energy, 0.0) / self.c1) * (1.0 + BEAM_MARGIN) / R
            theta = self.theta_max - np.arccos(np.minimum(ratio, 1.0))
        return np.where(ratio <= 1.0, np.maximum(theta, 0.0), np.nan)

    def best_user_energy(self, helper_energy):
        """Most energy the user can harvest while the helper gets ``helper_energy``."""
        theta = self.angle_for(helper_energy)
        return np.where(np.isnan(theta), -np.inf, self.user_energy(np.nan_to_num(theta)))

    def beam(self, theta: float) -> np.ndarray:
        return math.cos(theta) * self.e1 + math.sin(theta) * self.e2


def _tx(bits: np.ndarray, t: np.ndarray, B: float, h: float, sigma2: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return t * np.expm1(bits / (t * B) * LN2) * sigma2 / h


class _PairProblem:
    """Total bits as a function of ell_1 for a batch of (t1, t2, t3) slots.

    For each ell_1 the beam is the one that just covers the helper's
    demand; the user spends what is left after offloading on local bits.
    The result is concave in ell_1.
    """

    def __init__(self, inst: Instance, frontier: EnergyFrontier, t1, t2, t3):
        self.inst = inst
        self.frontier = frontier
        self.hp = inst.helper(1)
        self.t1, self.t2, self.t3 = (np.asarray(t, dtype=float).reshape(-1, 1) for t in (t1, t2, t3))
        self.local = inst.T**2 / (float(inst.xi[0]) * float(inst.C[0]) ** 3)

    def helper_demand(self, ell):
        hp = self.hp
        with np.errstate(over="ignore", invalid="ignore"):
            return _tx(hp.beta * ell, self.t3, hp.B, hp.h, hp.sigma2_user) + hp.xi * hp.C**3 * ell**3 / self.t2**2

    def spare(self, ell):
        """User energy left for local computing; negative or nan when infeasible."""
        hp = self.hp
        with np.errstate(invalid="ignore"):
            return self.frontier.best_user_energy(self.helper_demand(ell)) - _tx(ell, self.t1, hp.B, hp.h, hp.sigma2)

    def total(self, ell):
        left = self.spare(ell)
        ok = left >= 0.0
        value = ell + np.cbrt(np.where(ok, left, 0.0) * (1.0 - 1e-12) * self.local)
        return np.where(ok, value, -np.inf)

    def upper_bits(self) -> np.ndarray:
        """Largest feasible ell_1 per slot triple (the feasible set is an interval)."""
        lo = np.zeros_like(self.t1)
        hi = np.full(self.t1.shape, SPECTRAL_CEILING * self.inst.B * self.inst.T)
        for _ in range(BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            ok = self.spare(mid) >= 0.0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return lo

    def maximise(self, n_grid: int) -> tuple[np.ndarray, np.ndarray]:
        """Best (value, ell_1) per slot triple: grid of n_grid intervals, then
        golden section around the best grid point."""
        top = self.upper_bits()
        frac = np.arange(n_grid + 1) / n_grid
        grid = top * frac
        values = self.total(grid)
        idx = np.argmax(values, axis=1)
        rows = np.arange(grid.shape[0])
        best_ell = grid[rows, idx]
        best_val = values[rows, idx]

        a = top * frac[np.maximum(idx - 1, 0)][:, None]
        b = top * frac[np.minimum(idx + 1, n_grid)][:, None]
        x1 = b - INV_PHI * (b - a)
        x2 = a + INV_PHI * (b - a)
        f1, f2 = self.total(x1), self.total(x2)
        for _ in range(GOLDEN_STEPS):
            left = f1 >= f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            x2n = np.where(left, x1, a + INV_PHI * (b - a))
            x1n = np.where(left, b - INV_PHI * (b - a), x2)
            f2n = np.where(left, f1, self.total(x2n))
            f1n = np.where(left, self.total(x1n), f2)
            x1, x2, f1, f2 = x1n, x2n, f1n, f2n
        for x, f in ((x1[:, 0], f1[:, 0]), (x2[:, 0], f2[:, 0])):
            better = f > best_val
            best_val = np.where(better, f, best_val)
            best_ell = np.where(better, x, best_ell)
        return best_val, best_ell


def brute_force_small(inst: Instance, resolution: tuple[int, int, int] = (200, 200, 400)) -> OracleResult:
    """单助手实例的穷举搜索

    Grid over the offload and compute slot fractions (t3 takes the rest)
    and over ell_1 in [0, largest feasible], refined by golden section;
    the beam for each candidate comes from the energy frontier in closed
    form. Slot and ell_1 grids of n intervals nest in grids of j * n
    intervals, and refining that way never lowers the result.
    """
    if inst.K != 1:
        raise InputError(f"brute_force_small supports K = 1 only, got K = {inst.K}")
    n1, n2, n_ell = (int(r) for r in resolution)
    if min(n1, n2, n_ell) < 2:
        raise InputError("every grid resolution must be at least 2")

    if inst.P_max == 0 or not np.any(inst.g[0]):
        sol = Solution.build(inst, np.zeros(2), np.zeros((1, 3)), EnergyCovariance.zeros(inst.N))
        return OracleResult(solution=sol, objective=0.0, theta=0.0, candidates=0)

    frontier = EnergyFrontier.of(inst)
    f1 = np.arange(1, n1) / n1
    f2 = np.arange(1, n2) / n2
    F1, F2 = np.meshgrid(f1, f2, indexing="ij")
    mask = F1 + F2 < 1.0 - 1e-12
    pairs = np.column_stack([F1[mask], F2[mask]]) * inst.T

    best = (-math.inf, 0.0, np.zeros(3))
    for start in range(0, pairs.shape[0], CHUNK_PAIRS):
        t1 = pairs[start: start + CHUNK_PAIRS, 0]
        t2 = pairs[start: start + CHUNK_PAIRS, 1]
        t3 = inst.T - t1 - t2
        value, ell1 = _PairProblem(inst, frontier, t1, t2, t3).maximise(n_ell)
        j = int(np.argmax(value))
        if value[j] > best[0]:
            best = (float(value[j]), float(ell1[j]), np.array([t1[j], t2[j], t3[j]]))

    _, ell1, t = best
    if ell1 == 0.0:
        t = np.zeros(3)
    demand = helper_energy_demand(inst, 1, ell1, t)
    offload = offload_tx_energy(ell1, float(t[0]), inst.B, float(inst.h[0]), float(inst.sigma2[1]))
    theta = float(np.nan_to_num(frontier.angle_for(demand)))
    left = max(float(frontier.user_energy(theta)) - offload, 0.0) * (1.0 - 1e-12)
    ell0 = float(np.cbrt(left * inst.T**2 / (inst.xi[0] * inst.C[0] ** 3)))

    v = frontier.beam(theta)
    Q = EnergyCovariance(inst.P_max * np.outer(v, v.conj()))
    sol = Solution.build(inst, np.array([ell0, ell1]), t.reshape(1, 3), Q)
    report = check_feasible(inst, sol, 1e-9)
    if not report.feasible:
        raise FeasibilityError(
            "oracle candidate failed the feasibility check: "
            + ", ".join(s.label for s in report.violations)
        )
    candidates = pairs.shape[0] * (n_ell + 1)
    logger.info("oracle: %.9g bits over %d candidates", sol.objective, candidates)
    return OracleResult(solution=sol, objective=sol.objective, theta=theta, candidates=candidates)


# ---------------------------------------------------------------------------
# KKT residuals
# ---------------------------------------------------------------------------

KKT_CATEGORIES = ("primal", "dual", "complementary", "stationarity")


@dataclass
class KktReport:
    """KKT 残差报告"""
    residuals: dict[str, float]
    details: dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def passed(self, tol: float) -> bool:
        return all(v <= tol for v in self.residuals.values())

    def worst(self) -> tuple[str, float]:
        name = max(self.details, key=self.details.get) if self.details else ""
        return name, self.details.get(name, 0.0)


def kkt_residuals(
    sol: Solution,
    dp: DualPoint,
    inst: Instance,
    lambda_min: float = LAMBDA_MIN,
    rates: Optional[list[RateTriple]] = None,
) -> KktReport:
    """KKT 残差

    Scaled residuals of the optimality conditions, grouped by category.

    Complementary products (units of bits) are divided by the objective;
    energy-rate conditions by mu_k; the remaining terms are dimensionless.
    """
    details: dict[str, float] = {}
    bits_scale = max(sol.objective, 1.0)

    report = check_feasible(inst, sol, 0.0)
    details["primal"] = max(
        [max(0.0, -s.slack) / s.scale for s in report.slacks if math.isfinite(s.slack)] or [0.0]
    )
    if any(not math.isfinite(s.slack) for s in report.slacks):
        details["primal"] = math.inf

    details["dual.lambda"] = float(np.max(np.maximum(0.0, lambda_min - dp.lam)) / lambda_min)
    details["dual.mu"] = float(np.max(np.maximum(0.0, -dp.mu), initial=0.0) / max(float(np.max(np.abs(dp.mu), initial=0.0)), 1e-300))
    details["dual.rho"] = max(0.0, -dp.rho) / max(abs(dp.rho), 1e-300)
    F = psd_matrix_F(dp, inst)
    top = float(np.linalg.eigvalsh(F)[-1])
    details["dual.psd"] = max(0.0, top) / max(_psd_scale(dp, inst), 1e-300)

    for s in report.by_name("user_energy") + report.by_name("helper_energy"):
        k = s.index[0] if s.index else 0
        details[f"complementary.energy[{k}]"] = abs(dp.lam[k] * s.slack) / bits_scale
    for s in report.by_name("time_budget"):
        k = s.index[0]
        details[f"complementary.time[{k}]"] = abs(dp.mu[k - 1] * s.slack) / bits_scale
    power = report.by_name("power_budget")[0]
    details["complementary.power"] = abs(dp.rho * power.slack) / bits_scale

    lam0 = float(dp.lam[0])
    details["stationarity.local"] = abs(
        1.0 - 3.0 * lam0 * inst.xi[0] * inst.C[0] ** 3 * sol.ell[0] ** 2 / inst.T**2
    )
    for k in range(1, inst.K + 1):
        hp = inst.helper(k)
        lam_k, mu_k = float(dp.lam[k]), float(dp.mu[k - 1])
        r_opt = rates[k - 1] if rates is not None else optimal_rates(lam0, lam_k, mu_k, hp)
        M = helper_gain_coefficient(r_opt, lam0, lam_k, mu_k, hp)
        ell_k = float(sol.ell[k])
        details[f"stationarity.bits[{k}]"] = bits_stationarity_residual(M, ell_k)
        if ell_k > 0 and np.all(sol.t[k - 1] > 0):
            used = RateTriple(*(ell_k / sol.t[k - 1]))
            res = rate_stationarity_residuals(used, lam0, lam_k, mu_k, hp)
            details[f"stationarity.rates[{k}]"] = float(np.max(res))
    details["stationarity.covariance"] = abs(float(np.trace(F @ sol.Q.Q).real)) / bits_scale

    residuals = {
        cat: max([v for name, v in details.items() if name.split(".")[0] == cat] or [0.0])
        for cat in KKT_CATEGORIES
    }
    return KktReport(residuals=residuals, details=details)
