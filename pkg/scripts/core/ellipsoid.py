#!/usr/bin/env python3
"""
Central-cut ellipsoid method for convex minimisation with cutting-plane
feasibility oracles.

The oracle is called at the current centre and answers either with the
objective value and a subgradient (feasible centre) or with the gradient of
a violated convex constraint (infeasible centre). Either way the ellipsoid
is cut through its centre.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..constants import ELLIPSOID_GAP_TOL, ELLIPSOID_ITER_PER_DIM, ELLIPSOID_VOL_TOL
from ..errors import InfeasibleError, InputError, NumericError

logger = logging.getLogger(__name__)

LOG_EVERY = 500


@dataclass(frozen=True)
class OracleAnswer:
    """椭球法预言机应答"""
    feasible: bool
    gradient: np.ndarray
    value: float = math.nan

    @classmethod
    def objective(cls, value: float, subgradient) -> "OracleAnswer":
        return cls(feasible=True, gradient=np.asarray(subgradient, dtype=float), value=float(value))

    @classmethod
    def cut(cls, gradient) -> "OracleAnswer":
        return cls(feasible=False, gradient=np.asarray(gradient, dtype=float))


Oracle = Callable[[np.ndarray], OracleAnswer]


@dataclass
class EllipsoidState:
    """椭球状态"""
    center: np.ndarray
    shape: np.ndarray
    iteration: int = 0
    best_point: Optional[np.ndarray] = None
    best_value: float = math.inf
    lower_bound: float = -math.inf
    log_det: float = 0.0

    @property
    def n(self) -> int:
        return int(self.center.size)


@dataclass(frozen=True)
class HistoryEntry:
    """迭代记录"""
    iteration: int
    value: float
    center: np.ndarray
    log_det: float


@dataclass
class EllipsoidResult:
    """椭球法结果"""
    point: np.ndarray
    value: float
    lower_bound: float
    iterations: int
    stop_reason: str
    history: list[HistoryEntry] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound


def _cholesky_log_det(shape: np.ndarray, iteration: int) -> float:
    try:
        L = np.linalg.cholesky(shape)
    except np.linalg.LinAlgError as exc:
        raise NumericError("ellipsoid shape matrix lost positive definiteness", iteration=iteration) from exc
    diag = np.diag(L)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise NumericError("ellipsoid shape matrix lost positive definiteness", iteration=iteration)
    return float(2.0 * np.sum(np.log(diag)))


def central_cut(state: EllipsoidState, gradient: np.ndarray) -> float:
    """中心割更新

    Shrink ``state`` to the minimum-volume ellipsoid containing the half
    {y : g^T (y - center) <= 0}. Returns sqrt(g^T P g) before the update."""
    n = state.n
    P = state.shape
    Pg = P @ gradient
    gPg = float(gradient @ Pg)
    if not gPg > 0 or not math.isfinite(gPg):
        raise NumericError("degenerate cut direction", iteration=state.iteration)
    width = math.sqrt(gPg)
    b = Pg / width

    if n == 1:
        state.center = state.center - 0.5 * b
        state.shape = P / 4.0
    else:
        state.center = state.center - b / (n + 1)
        shape = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1)) * np.outer(b, b))
        state.shape = 0.5 * (shape + shape.T)
    return width


def ellipsoid_minimize(
    oracle: Oracle,
    center0,
    radius0: float,
    vol_tol: float = ELLIPSOID_VOL_TOL,
    max_iter: Optional[int] = None,
    gap_tol: float = ELLIPSOID_GAP_TOL,
    keep_history: bool = True,
) -> EllipsoidResult:
    """椭球法最小化

    Minimise a convex function over a convex set described by ``oracle``.

    Stops when the geometric-mean semi-axis ratio to the initial ball drops
    below ``vol_tol``, when the certified gap between the best value and
    the ellipsoid lower bound is within ``gap_tol`` (relative), or after
    ``max_iter`` iterations.
    """
    center = np.asarray(center0, dtype=float).reshape(-1).copy()
    n = center.size
    if n < 1:
        raise InputError("ellipsoid_minimize needs at least one dimension")
    if not radius0 > 0:
        raise InputError(f"radius0 must be positive, got {radius0!r}")
    if max_iter is None:
        max_iter = ELLIPSOID_ITER_PER_DIM * n

    state = EllipsoidState(center=center, shape=(radius0**2) * np.eye(n))
    state.log_det = _cholesky_log_det(state.shape, 0)
    log_det0 = state.log_det
    history: list[HistoryEntry] = []
    stop_reason = "max_iter"

    while state.iteration < max_iter:
        answer = oracle(state.center.copy())
        grad = np.asarray(answer.gradient, dtype=float).reshape(-1)
        if grad.size != n or not np.all(np.isfinite(grad)):
            raise NumericError("oracle returned an invalid gradient", iteration=state.iteration)

        if answer.feasible:
            value = float(answer.value)
            if not math.isfinite(value):
                raise NumericError("oracle returned a non-finite value", iteration=state.iteration)
            if value < state.best_value:
                state.best_value = value
                state.best_point = state.center.copy()
            if not np.any(grad):
                state.lower_bound = value
                stop_reason = "zero_subgradient"
                if keep_history:
                    history.append(HistoryEntry(state.iteration, value, state.center.copy(), state.log_det))
                break

        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            raise NumericError("feasibility cut with zero gradient", iteration=state.iteration)
        unit = grad / norm

        if keep_history:
            history.append(HistoryEntry(
                state.iteration,
                float(answer.value) if answer.feasible else math.nan,
                state.center.copy(),
                state.log_det,
            ))

        width = central_cut(state, unit)
        if answer.feasible:
            state.lower_bound = max(state.lower_bound, float(answer.value) - norm * width)

        state.iteration += 1
        state.log_det = _cholesky_log_det(state.shape, state.iteration)

        if state.iteration % LOG_EVERY == 0:
            logger.debug(
                "ellipsoid iter=%d best=%.9g bound=%.9g log_det=%.3f",
                state.iteration, state.best_value, state.lower_bound, state.log_det,
            )

        ratio = math.exp((state.log_det - log_det0) / (2.0 * n))
        if ratio < vol_tol:
            stop_reason = "volume"
            break
        if state.best_point is not None and math.isfinite(state.lower_bound):
            gap = state.best_value - state.lower_bound
            if gap <= gap_tol * max(1.0, abs(state.best_value)):
                stop_reason = "gap"
                break

    if state.best_point is None:
        raise InfeasibleError(f"no feasible point found in {state.iteration} ellipsoid iterations")

    logger.info(
        "ellipsoid stopped (%s) after %d iterations: value=%.12g gap=%.3g",
        stop_reason, state.iteration, state.best_value, state.best_value - state.lower_bound,
    )
    return EllipsoidResult(
        point=state.best_point,
        value=state.best_value,
        lower_bound=state.lower_bound,
        iterations=state.iteration,
        stop_reason=stop_reason,
        history=history,
    )
