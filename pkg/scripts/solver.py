#!/usr/bin/env python3
"""
求解协调器

Runs the proposed scheme end to end: ellipsoid search over the dual,
SDP-based primal recovery, feasibility and optimality checks. Also
dispatches the benchmark schemes and writes solve reports.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    from .config_solver import SolverConfig
    from .errors import FeasibilityError, InputError, NumericError, RecoveryError, SolverError
    from .core.barrier_sdp import BarrierSettings
    from .core.baselines import solve_equal_time, solve_local_only
    from .core.dual_core import (
        DualPoint,
        RateTriple,
        dual_subgradient,
        eval_dual,
        feasibility_cut,
        reference_scales,
    )
    from .core.ellipsoid import HistoryEntry, OracleAnswer, ellipsoid_minimize
    from .core.model import EnergyCovariance, Instance, Solution, check_feasible, energy_breakdown
    from .core.oracle import KktReport, brute_force_small, kkt_residuals
    from .core.primal_recovery import assemble_solution, duality_gap, solve_recovery_sdp
    from .core.refinement import refine_solution
except ImportError:
    from config_solver import SolverConfig
    from errors import FeasibilityError, InputError, NumericError, RecoveryError, SolverError
    from core.barrier_sdp import BarrierSettings
    from core.baselines import solve_equal_time, solve_local_only
    from core.dual_core import (
        DualPoint,
        RateTriple,
        dual_subgradient,
        eval_dual,
        feasibility_cut,
        reference_scales,
    )
    from core.ellipsoid import HistoryEntry, OracleAnswer, ellipsoid_minimize
    from core.model import EnergyCovariance, Instance, Solution, check_feasible, energy_breakdown
    from core.oracle import KktReport, brute_force_small, kkt_residuals
    from core.primal_recovery import assemble_solution, duality_gap, solve_recovery_sdp
    from core.refinement import refine_solution

logger = logging.getLogger(__name__)

LOCAL_TOL = 1e-9


@dataclass
class SolveReport:
    """结果报告"""
    solution: Solution
    dual_value: float
    dual_point: DualPoint
    gap: float
    iterations: int
    stop_reason: str
    wall_time_s: float
    rates: list[RateTriple] = field(default_factory=list)
    kkt: Optional[KktReport] = None
    history: list[HistoryEntry] = field(default_factory=list)
    adjusted: bool = False
    refined: bool = False

    @property
    def objective(self) -> float:
        return self.solution.objective


@dataclass
class VerifyOutcome:
    """校验结果

    One solver-vs-oracle comparison.
    """
    seed: int
    solver_bits: float = math.nan
    oracle_bits: float = math.nan
    deviation: float = math.inf
    gap: float = math.inf
    kkt: float = math.inf
    error: Optional[str] = None

    def passed(self, oracle_tol: float, gap_tol: float, kkt_tol: float) -> bool:
        return (
            self.error is None
            and self.deviation <= oracle_tol
            and self.gap <= gap_tol
            and self.kkt <= kkt_tol
        )


class CooperativeSolver:
    """协作计算求解器"""

    SCHEMES = ("proposed", "equal_time", "local_only")

    def __init__(self, config: Optional[SolverConfig] = None, keep_history: bool = True):
        self.config = config or SolverConfig()
        self.keep_history = keep_history
        self.barrier = BarrierSettings.from_config(self.config)

    def _dual_oracle(self, inst: Instance, scale: np.ndarray):
        lambda_min = self.config.lambda_min

        def oracle(z: np.ndarray) -> OracleAnswer:
            dp = DualPoint.from_vector(z * scale, inst.K)
            cut = feasibility_cut(dp, inst, lambda_min)
            if cut is not None:
                return OracleAnswer.cut(cut.gradient * scale)
            de = eval_dual(dp, inst, lambda_min)
            return OracleAnswer.objective(de.value, dual_subgradient(de, dp, inst) * scale)

        return oracle

    def _idle_report(self, inst: Instance, started: float) -> SolveReport:
        """No energy reaches any node: nothing can be computed."""
        sol = Solution.build(inst, np.zeros(inst.K + 1), np.zeros((inst.K, 3)), EnergyCovariance.zeros(inst.N))
        dp = DualPoint(lam=np.full(inst.K + 1, self.config.lambda_min), mu=np.zeros(inst.K), rho=0.0)
        return SolveReport(
            solution=sol, dual_value=0.0, dual_point=dp, gap=0.0, iterations=0,
            stop_reason="no_energy", wall_time_s=time.perf_counter() - started,
        )

    def solve(self, inst: Instance) -> SolveReport:
        """求解提出方案

        Proposed scheme: optimal beamforming, task partition and time allocation.
        """
        started = time.perf_counter()
        if inst.P_max == 0 or not np.any(inst.g):
            return self._idle_report(inst, started)

        cfg = self.config
        dim = 2 * inst.K + 2
        scale = reference_scales(inst)
        center = np.ones(dim)
        center[: inst.K + 1] = np.maximum(1.0, 2.0 * cfg.lambda_min / scale[: inst.K + 1])

        logger.info("dual search: %d dimensions, radius %.3g", dim, cfg.radius0)
        res = ellipsoid_minimize(
            self._dual_oracle(inst, scale),
            center,
            cfg.radius0,
            vol_tol=cfg.vol_tol,
            max_iter=cfg.max_iter(dim),
            gap_tol=cfg.gap_tol,
            keep_history=self.keep_history,
        )
        dp = DualPoint.from_vector(res.point * scale, inst.K)
        de = eval_dual(dp, inst, cfg.lambda_min)
        rates = [h.rates for h in de.helpers]

        recovery = solve_recovery_sdp(dp, inst, de.ell0, rates=rates, settings=self.barrier)
        sol = assemble_solution(inst, recovery.Q, recovery.ell0, recovery.ell, rates)

        report = check_feasible(inst, sol, 1e-9)
        if not report.feasible:
            raise FeasibilityError(
                "recovered solution violates " + ", ".join(s.label for s in report.violations)
            )

        dual_value = res.value
        refined = False
        try:
            ref = refine_solution(inst, sol, cfg.lambda_min, self.barrier)
        except (NumericError, RecoveryError, InputError) as exc:
            logger.warning("KKT refinement failed (%s); keeping the recovered solution", exc)
        else:
            if (check_feasible(inst, ref.solution, 1e-9).feasible
                    and ref.solution.objective >= sol.objective * (1.0 - LOCAL_TOL)):
                sol, dp, refined = ref.solution, ref.dual_point, True
                try:
                    de = eval_dual(dp, inst, cfg.lambda_min)
                    dual_value = min(dual_value, de.value)
                    rates = [h.rates for h in de.helpers]
                except InputError as exc:
                    logger.warning("refined multipliers are outside the dual domain: %s", exc)
                    rates = None
            else:
                logger.warning("refinement lost bits (%.9g -> %.9g); keeping the recovered solution",
                               sol.objective, ref.solution.objective)

        local = solve_local_only(inst)
        if sol.objective < local.objective * (1.0 - LOCAL_TOL):
            raise RecoveryError(
                f"recovered {sol.objective:.9g} bits is below local computing ({local.objective:.9g})"
            )

        kkt = kkt_residuals(sol, dp, inst, cfg.lambda_min, rates)
        gap = duality_gap(sol, dual_value)
        logger.info("proposed: %.9g bits, dual %.9g, gap %.3e", sol.objective, dual_value, gap)
        return SolveReport(
            solution=sol,
            dual_value=dual_value,
            dual_point=dp,
            gap=gap,
            iterations=res.iterations,
            stop_reason=res.stop_reason,
            wall_time_s=time.perf_counter() - started,
            rates=rates or [],
            kkt=kkt,
            history=res.history,
            adjusted=recovery.adjusted,
            refined=refined,
        )

    def run_scheme(self, scheme: str, inst: Instance) -> Solution:
        """运行指定方案"""
        if scheme == "proposed":
            return self.solve(inst).solution
        if scheme == "equal_time":
            return solve_equal_time(inst, self.config).solution
        if scheme == "local_only":
            return solve_local_only(inst)
        raise InputError(f"unknown scheme {scheme!r}; expected one of {self.SCHEMES}")

    def solve_all(self, inst: Instance, schemes: tuple[str, ...] = SCHEMES) -> dict[str, dict]:
        """运行全部方案

        Run each scheme; returns per-scheme summaries (proposed carries its report).
        """
        results: dict[str, dict] = {}
        for scheme in schemes:
            started = time.perf_counter()
            if scheme == "proposed":
                rep = self.solve(inst)
                results[scheme] = {"solution": rep.solution, "report": rep,
                                   "wall_time_s": rep.wall_time_s}
                continue
            sol = self.run_scheme(scheme, inst)
            results[scheme] = {"solution": sol, "report": None,
                               "wall_time_s": time.perf_counter() - started}
        return results

    def verify(self, inst: Instance, seed: int, resolution: tuple[int, int, int]) -> VerifyOutcome:
        """与穷举搜索对比

        Compare the proposed scheme with exhaustive search on a one-helper instance.
        """
        outcome = VerifyOutcome(seed=seed)
        try:
            oracle = brute_force_small(inst, resolution)
            rep = self.solve(inst)
        except (SolverError, InputError) as exc:
            logger.warning("seed %d: %s: %s", seed, type(exc).__name__, exc)
            outcome.error = f"{type(exc).__name__}: {exc}"
            return outcome
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            # numerical breakdown outside the solver's own checks
            logger.warning("seed %d: numerical failure: %s", seed, exc)
            outcome.error = f"NumericError: {exc}"
            return outcome
        outcome.solver_bits = rep.objective
        outcome.oracle_bits = oracle.objective
        outcome.deviation = abs(rep.objective - oracle.objective) / max(oracle.objective, 1.0)
        outcome.gap = abs(rep.gap)
        outcome.kkt = rep.kkt.max_residual if rep.kkt else 0.0
        logger.info("seed %d: solver %.9g, oracle %.9g, deviation %.3e, gap %.3e, kkt %.3e",
                    seed, outcome.solver_bits, outcome.oracle_bits, outcome.deviation,
                    outcome.gap, outcome.kkt)
        return outcome

    @staticmethod
    def solution_to_dict(inst: Instance, sol: Solution) -> dict:
        """解的字典表示"""
        return {
            "objective_bits": sol.objective,
            "ell": sol.ell.tolist(),
            "t": sol.t.tolist(),
            "q": sol.q.tolist(),
            "p": sol.p.tolist(),
            "trace_Q": sol.Q.trace,
            "beams": int(sol.Q.beams().shape[1]),
            "energy": energy_breakdown(inst, sol),
        }

    def save_report(
        self,
        inst: Instance,
        results: dict[str, dict],
        output_dir: Path,
        header: Optional[dict] = None,
    ) -> Path:
        """保存求解报告 (report.json)"""
        output_dir.mkdir(parents=True, exist_ok=True)
        schemes = {}
        for name, entry in results.items():
            data = self.solution_to_dict(inst, entry["solution"])
            data["wall_time_s"] = entry["wall_time_s"]
            rep: Optional[SolveReport] = entry["report"]
            if rep is not None:
                data.update({
                    "dual_value": rep.dual_value,
                    "duality_gap": rep.gap,
                    "iterations": rep.iterations,
                    "stop_reason": rep.stop_reason,
                    "local_bits_adjusted": rep.adjusted,
                    "kkt_refined": rep.refined,
                    "kkt": rep.kkt.residuals if rep.kkt else None,
                    "dual_point": rep.dual_point.to_vector().tolist(),
                })
            schemes[name] = data

        json_data = {
            "parameters": header or {},
            "solver": self.config.as_dict(),
            "schemes": schemes,
        }
        path = output_dir / "report.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(json_data, f, ensure_ascii=False, indent=2)
        return path
