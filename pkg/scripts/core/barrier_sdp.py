#!/usr/bin/env python3
"""
Compact log-barrier solver for small linear programs with one Hermitian
PSD block.

    minimise    c^T z
    subject to  C(x) >= 0          (m x m Hermitian, PSD)
                y >= 0
                G z <= h
    z = [x, y, w]   x: m*m real parameters of C, y: non-negative scalars,
                    w: free scalars

The PSD block is handled through its real symmetric lifting
[[Re C, -Im C], [Im C, Re C]] (whose log-determinant is twice that of C).
A phase-I problem with one extra free variable finds a strictly feasible
start unless a warm start is supplied.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla

from ..constants import BARRIER_MU, BARRIER_TOL, LINE_SEARCH_ALPHA, LINE_SEARCH_BETA
from ..errors import InfeasibleError, InputError, NumericError

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_NEWTON = 200
MIN_STEP = 1e-14


# ---------------------------------------------------------------------------
# Hermitian parametrisation
# ---------------------------------------------------------------------------

def hermitian_basis(m: int) -> np.ndarray:
    """Hermitian 矩阵基

    Basis E_p (m*m, m, m): diagonal entries first, then for each i < j a
    symmetric real pair and an antisymmetric imaginary pair."""
    basis = []
    for i in range(m):
        E = np.zeros((m, m), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(m):
        for j in range(i + 1, m):
            E = np.zeros((m, m), dtype=complex)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
            E = np.zeros((m, m), dtype=complex)
            E[i, j] = 1j
            E[j, i] = -1j
            basis.append(E)
    return np.array(basis).reshape(m * m, m, m)


def unpack_hermitian(x: np.ndarray, m: int) -> np.ndarray:
    """参数向量还原为 Hermitian 矩阵"""
    return np.tensordot(np.asarray(x, dtype=float), hermitian_basis(m), axes=1)


def pack_hermitian(C: np.ndarray) -> np.ndarray:
    """Hermitian 矩阵压缩为参数向量"""
    C = np.asarray(C, dtype=complex)
    m = C.shape[0]
    x = [C[i, i].real for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            x.append(C[i, j].real)
            x.append(C[i, j].imag)
    return np.array(x, dtype=float)


def lift(C: np.ndarray) -> np.ndarray:
    """复矩阵的实对称提升"""
    re, im = C.real, C.imag
    return np.block([[re, -im], [im, re]])


def trace_coefficients(m: int) -> np.ndarray:
    """迹的线性系数

    Coefficients on x of tr(C).
    """
    coeff = np.zeros(m * m)
    coeff[:m] = 1.0
    return coeff


def quadratic_coefficients(a: np.ndarray, m: int) -> np.ndarray:
    """二次型的线性系数

    Coefficients on x of the real quadratic form a^H C a.
    """
    a = np.asarray(a, dtype=complex).reshape(-1)
    basis = hermitian_basis(m)
    return np.real(np.einsum("i,pij,j->p", a.conj(), basis, a))


# ---------------------------------------------------------------------------
# Problem / result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierSettings:
    """障碍法参数"""
    tol: float = BARRIER_TOL
    mu: float = BARRIER_MU
    alpha: float = LINE_SEARCH_ALPHA
    beta: float = LINE_SEARCH_BETA
    max_newton: int = MAX_NEWTON

    @classmethod
    def from_config(cls, config) -> "BarrierSettings":
        return cls(
            tol=config.barrier_tol,
            mu=config.barrier_mu,
            alpha=config.line_search_alpha,
            beta=config.line_search_beta,
        )


@dataclass
class LmiProblem:
    """线性矩阵不等式问题"""
    m: int
    n_y: int
    n_free: int
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if self.m < 1:
            raise InputError("LMI block must be at least 1x1")
        if self.c.size != self.n:
            raise InputError(f"objective has {self.c.size} entries, expected {self.n}")
        if self.G.size and self.G.shape != (self.h.size, self.n):
            raise InputError(f"constraint matrix has shape {self.G.shape}, expected ({self.h.size}, {self.n})")
        if not self.G.size:
            self.G = np.zeros((0, self.n))

    @property
    def n_x(self) -> int:
        return self.m * self.m

    @property
    def n(self) -> int:
        return self.n_x + self.n_y + self.n_free

    @property
    def degree(self) -> int:
        """Barrier parameter: m for the PSD block, one per scalar barrier."""
        return self.m + self.n_y + self.h.size

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return z[: self.n_x], z[self.n_x: self.n_x + self.n_y], z[self.n_x + self.n_y:]

    def normalized(self) -> "LmiProblem":
        """Same feasible set with unit-norm constraint rows."""
        if not self.h.size:
            return self
        scale = np.maximum(np.linalg.norm(self.G, axis=1), 1e-300)
        return LmiProblem(self.m, self.n_y, self.n_free, self.c, self.G / scale[:, None], self.h / scale)


@dataclass
class BarrierResult:
    """障碍法求解结果"""
    z: np.ndarray
    C: np.ndarray
    y: np.ndarray
    free: np.ndarray
    objective: float
    duality_measure: float
    stages: int
    newton_steps: int
    stalled: bool = False


# ---------------------------------------------------------------------------
# Barrier machinery
# ---------------------------------------------------------------------------

class LmiBarrier:
    """LMI 对数障碍函数

    Log barrier of the PSD block, the non-negative scalars and G z <= h.
    """

    def __init__(self, problem: LmiProblem):
        self.p = problem
        self.basis = hermitian_basis(problem.m)
        self.lifted = np.array([lift(E) for E in self.basis])

    def value(self, z: np.ndarray) -> float:
        """Barrier value, +inf outside the strict interior."""
        x, y, _ = self.p.split(z)
        if y.size and np.any(y <= 0):
            return math.inf
        slack = self.p.h - self.p.G @ z
        if slack.size and np.any(slack <= 0):
            return math.inf
        Cl = lift(np.tensordot(x, self.basis, axes=1))
        try:
            L = np.linalg.cholesky(Cl)
        except np.linalg.LinAlgError:
            return math.inf
        diag = np.diag(L)
        if np.any(diag <= 0):
            return math.inf
        return float(-np.sum(np.log(diag)) - np.sum(np.log(y)) - np.sum(np.log(slack)))

    def derivatives(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        x, y, _ = p.split(z)
        Cl = lift(np.tensordot(x, self.basis, axes=1))
        S = sla.cho_solve(sla.cho_factor(Cl), np.eye(Cl.shape[0]))
        SL = np.einsum("ij,pjk->pik", S, self.lifted)

        grad = np.zeros(p.n)
        hess = np.zeros((p.n, p.n))
        grad[: p.n_x] = -0.5 * np.einsum("pii->p", SL)
        hess[: p.n_x, : p.n_x] = 0.5 * np.einsum("pij,qji->pq", SL, SL)
        if p.n_y:
            iy = slice(p.n_x, p.n_x + p.n_y)
            grad[iy] = -1.0 / y
            hess[iy, iy] += np.diag(1.0 / y**2)
        if p.h.size:
            inv = 1.0 / (p.h - p.G @ z)
            grad += p.G.T @ inv
            hess += (p.G.T * inv**2) @ p.G
        return grad, 0.5 * (hess + hess.T)


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        return sla.solve(hess, -grad, assume_a="sym")
    except (sla.LinAlgError, ValueError):
        return np.linalg.lstsq(hess, -grad, rcond=None)[0]


def _barrier_path(
    problem: LmiProblem,
    z0: np.ndarray,
    settings: BarrierSettings,
    early_stop: Optional[Callable[[np.ndarray], bool]] = None,
    barrier=None,
    degree: Optional[float] = None,
) -> BarrierResult:
    barrier = barrier if barrier is not None else LmiBarrier(problem)
    z = z0.copy()
    if not math.isfinite(barrier.value(z)):
        raise InputError("barrier start point is not strictly feasible")

    t = 1.0
    theta = float(degree) if degree is not None else problem.degree
    stages = 0
    steps = 0
    stalled = False

    def centred_objective(zz: np.ndarray) -> float:
        b = barrier.value(zz)
        return math.inf if not math.isfinite(b) else t * float(problem.c @ zz) + b

    while True:
        stages += 1
        for _ in range(settings.max_newton):
            bgrad, hess = barrier.derivatives(z)
            grad = t * problem.c + bgrad
            dz = _newton_direction(hess, grad)
            decrement = -float(grad @ dz)
            if not math.isfinite(decrement):
                raise NumericError("barrier Newton system is singular", iteration=steps)
            if decrement / 2.0 <= NEWTON_TOL:
                break

            f0 = centred_objective(z)
            s = 1.0
            while not math.isfinite(barrier.value(z + s * dz)) and s > MIN_STEP:
                s *= settings.beta
            while centred_objective(z + s * dz) > f0 - settings.alpha * s * decrement and s > MIN_STEP:
                s *= settings.beta
            if s <= MIN_STEP:
                stalled = True
                break
            z = z + s * dz
            steps += 1
            if early_stop is not None and early_stop(z):
                return _result(problem, z, theta / t, stages, steps, stalled=False)
        else:
            stalled = True

        if stalled:
            logger.warning(
                "barrier stalled at stage %d (t=%.3g, measure=%.3g); returning current iterate",
                stages, t, theta / t,
            )
            break
        if theta / t <= settings.tol:
            break
        t *= settings.mu

    return _result(problem, z, theta / t, stages, steps, stalled)


def _result(problem: LmiProblem, z: np.ndarray, measure: float, stages: int, steps: int, stalled: bool) -> BarrierResult:
    x, y, w = problem.split(z)
    return BarrierResult(
        z=z,
        C=unpack_hermitian(x, problem.m),
        y=y.copy(),
        free=w.copy(),
        objective=float(problem.c @ z),
        duality_measure=float(measure),
        stages=stages,
        newton_steps=steps,
        stalled=stalled,
    )


def _default_start(problem: LmiProblem) -> np.ndarray:
    z = np.zeros(problem.n)
    z[: problem.m] = 1.0 / (2.0 * problem.m)
    z[problem.n_x: problem.n_x + problem.n_y] = 1e-3
    return z


def _phase_one(problem: LmiProblem, z_start: np.ndarray, settings: BarrierSettings) -> np.ndarray:
    """Strictly feasible point of ``problem`` via min s s.t. Gz - s <= h."""
    J = problem.h.size
    if J == 0:
        return z_start
    slack0 = float(np.max(problem.G @ z_start - problem.h))
    s0 = max(slack0, 0.0) + 1.0

    G1 = np.hstack([problem.G, -np.ones((J, 1))])
    floor_row = np.zeros((1, problem.n + 1))
    floor_row[0, -1] = -1.0
    G1 = np.vstack([G1, floor_row])
    h1 = np.concatenate([problem.h, [1.0]])
    c1 = np.zeros(problem.n + 1)
    c1[-1] = 1.0
    aux = LmiProblem(problem.m, problem.n_y, problem.n_free + 1, c1, G1, h1)

    z1 = np.concatenate([z_start, [s0]])
    res = _barrier_path(aux, z1, settings, early_stop=lambda zz: zz[-1] < 0.0)
    if res.z[-1] >= 0.0:
        raise InfeasibleError(f"no strictly feasible point (phase-I optimum {res.z[-1]:.3e})")
    logger.debug("phase I reached s=%.3e after %d Newton steps", res.z[-1], res.newton_steps)
    return res.z[:-1]


def solve_lmi(
    problem: LmiProblem,
    z0: Optional[np.ndarray] = None,
    settings: Optional[BarrierSettings] = None,
) -> BarrierResult:
    """求解 LMI 问题

    Solve ``problem``; ``z0`` is used as-is when strictly feasible.
    """
    settings = settings or BarrierSettings()
    scaled = problem.normalized()
    barrier = LmiBarrier(scaled)

    if z0 is not None and math.isfinite(barrier.value(np.asarray(z0, dtype=float))):
        start = np.asarray(z0, dtype=float).copy()
    else:
        start = _phase_one(scaled, _default_start(scaled), settings)

    result = _barrier_path(scaled, start, settings)
    logger.debug(
        "barrier done: objective=%.12g measure=%.3g stages=%d steps=%d",
        result.objective, result.duality_measure, result.stages, result.newton_steps,
    )
    return result


def follow_central_path(
    problem: LmiProblem,
    barrier,
    degree: float,
    z0: np.ndarray,
    settings: Optional[BarrierSettings] = None,
) -> BarrierResult:
    """沿中心路径求解

    Minimise ``problem.c @ z`` under an arbitrary self-concordant ``barrier``.

    ``barrier`` must offer ``value(z)`` (+inf outside the interior) and
    ``derivatives(z)``; ``z0`` must be strictly feasible.
    """
    return _barrier_path(problem, np.asarray(z0, dtype=float), settings or BarrierSettings(),
                         barrier=barrier, degree=degree)
