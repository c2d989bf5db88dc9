#!/usr/bin/env python3
"""
Problem model

Domain types of the wireless-powered cooperative computation problem
(one user, K helpers, an N-antenna energy transmitter) together with the
energy / rate accounting and the feasibility check of the computation
rate maximisation problem.

Units: bits, seconds, Hz, Watts, Joules. Rates use base-2 logarithms.
Slot energies are perspective functions of (bits, duration); at a zero
duration they are 0 when the paired bit count is 0 and +inf otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import InputError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-9
IMAG_TOL = 1e-10


def _require_nonneg(**values: float) -> None:
    for name, value in values.items():
        if not value >= 0:
            raise InputError(f"{name} must be non-negative, got {value!r}")


def _node_vector(name: str, value, length: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(length, float(arr))
    arr = arr.reshape(-1)
    if arr.shape != (length,):
        raise InputError(f"{name} must have {length} entries, got {arr.shape[0]}")
    return arr


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HelperParams:
    """助手参数

    Parameters of one user-helper pair (k >= 1).
    """
    k: int
    T: float
    B: float
    beta: float
    zeta: float
    xi: float
    C: float
    sigma2: float       # noise at the helper (offload link)
    sigma2_user: float  # noise at the user (result link)
    h: float


@dataclass(frozen=True)
class Instance:
    """问题实例

    Full problem description.

    Node index 0 is the user, 1..K are helpers. ``g`` holds one channel
    vector per node (shape (K+1, N)); ``h`` the user-helper power gains.
    """
    T: float
    B: float
    beta: float
    P_max: float
    zeta: np.ndarray
    xi: np.ndarray
    C: np.ndarray
    sigma2: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        if g.ndim != 2 or g.shape[1] < 1:
            raise InputError(f"g must be a (K+1, N) array, got shape {g.shape}")
        nodes = g.shape[0]

        object.__setattr__(self, "g", g)
        for name in ("zeta", "xi", "C", "sigma2"):
            object.__setattr__(self, name, _node_vector(name, getattr(self, name), nodes))
        object.__setattr__(self, "h", _node_vector("h", self.h, nodes - 1))

        for name in ("T", "B", "beta"):
            if not float(getattr(self, name)) > 0:
                raise InputError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not float(self.P_max) >= 0:
            raise InputError(f"P_max must be non-negative, got {self.P_max!r}")
        if np.any(self.zeta <= 0) or np.any(self.zeta > 1):
            raise InputError("zeta must lie in (0, 1]")
        for name in ("xi", "C", "sigma2"):
            if np.any(getattr(self, name) <= 0):
                raise InputError(f"{name} must be positive")
        if np.any(self.h <= 0):
            raise InputError("h must be positive")

    @property
    def N(self) -> int:
        return int(self.g.shape[1])

    @property
    def K(self) -> int:
        return int(self.g.shape[0] - 1)

    def helper(self, k: int) -> HelperParams:
        if not 1 <= k <= self.K:
            raise InputError(f"helper index {k} out of range 1..{self.K}")
        return HelperParams(
            k=k,
            T=float(self.T),
            B=float(self.B),
            beta=float(self.beta),
            zeta=float(self.zeta[k]),
            xi=float(self.xi[k]),
            C=float(self.C[k]),
            sigma2=float(self.sigma2[k]),
            sigma2_user=float(self.sigma2[0]),
            h=float(self.h[k - 1]),
        )

    def mrt_energy(self, k: int) -> float:
        """Largest energy node k can harvest (all power beamed at it)."""
        return float(self.T * self.zeta[k] * self.P_max * np.vdot(self.g[k], self.g[k]).real)


@dataclass(frozen=True)
class EnergyCovariance:
    """能量波束协方差

    Transmit energy covariance Q of the energy transmitter.
    """
    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=complex)
        if Q.ndim == 0:
            Q = Q.reshape(1, 1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError(f"Q must be square, got shape {Q.shape}")
        scale = max(1.0, float(np.linalg.norm(Q)))
        if np.linalg.norm(Q - Q.conj().T) > HERMITIAN_TOL * scale:
            raise InputError("Q is not Hermitian")
        Q = 0.5 * (Q + Q.conj().T)
        trace = float(np.trace(Q).real)
        if Q.size and np.linalg.eigvalsh(Q)[0] < -PSD_TOL * abs(trace):
            raise InputError("Q is not positive semidefinite")
        object.__setattr__(self, "Q", Q)

    @classmethod
    def zeros(cls, N: int) -> "EnergyCovariance":
        return cls(np.zeros((N, N), dtype=complex))

    @classmethod
    def mrt(cls, g: np.ndarray, power: float) -> "EnergyCovariance":
        """Rank-one beam aligned with ``g`` carrying ``power`` Watts."""
        g = np.asarray(g, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(g))
        if norm == 0.0 or power <= 0:
            return cls.zeros(g.size)
        v = g / norm
        return cls(power * np.outer(v, v.conj()))

    @property
    def N(self) -> int:
        return int(self.Q.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.Q).real)

    def within_budget(self, P_max: float) -> bool:
        return self.trace <= P_max * (1.0 + TRACE_TOL) + 1e-300

    def beams(self, rel_tol: float = 1e-9) -> np.ndarray:
        """Energy beams from the eigenvalue decomposition of Q.

        Returns an (N, r) array whose columns are sqrt(eigval) * eigvec for
        the r eigenvalues above ``rel_tol`` times the largest one, strongest
        beam first.
        """
        w, V = np.linalg.eigh(self.Q)
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        if w.size == 0 or w[0] <= 0:
            return np.zeros((self.N, 0), dtype=complex)
        keep = w > rel_tol * w[0]
        return V[:, keep] * np.sqrt(w[keep])


@dataclass(frozen=True)
class Solution:
    """原始解

    Task partition, slot durations and energy beamforming.
    """
    ell: np.ndarray
    t: np.ndarray
    Q: EnergyCovariance
    q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def build(
        cls,
        inst: Instance,
        ell,
        t,
        Q: EnergyCovariance | np.ndarray,
    ) -> "Solution":
        ell = np.asarray(ell, dtype=float).reshape(-1)
        t = np.asarray(t, dtype=float).reshape(-1, 3) if inst.K else np.zeros((0, 3))
        if ell.shape != (inst.K + 1,):
            raise InputError(f"ell must have {inst.K + 1} entries, got {ell.shape[0]}")
        if t.shape != (inst.K, 3):
            raise InputError(f"t must have shape ({inst.K}, 3), got {t.shape}")
        if not isinstance(Q, EnergyCovariance):
            Q = EnergyCovariance(Q)
        if Q.N != inst.N:
            raise InputError(f"Q must be {inst.N}x{inst.N}, got {Q.N}x{Q.N}")

        q = np.zeros(inst.K)
        p = np.zeros(inst.K)
        for k in range(1, inst.K + 1):
            hp = inst.helper(k)
            bits = max(ell[k], 0.0)
            q[k - 1] = offload_power(bits, max(t[k - 1, 0], 0.0), hp.B, hp.h, hp.sigma2)
            p[k - 1] = result_power(bits, max(t[k - 1, 2], 0.0), hp.beta, hp.B, hp.h, hp.sigma2_user)
        return cls(ell=ell, t=t, Q=Q, q=q, p=p)

    @property
    def objective(self) -> float:
        return float(np.sum(self.ell))

    @property
    def K(self) -> int:
        return int(self.ell.size - 1)


# ---------------------------------------------------------------------------
# Energy / rate accounting
# ---------------------------------------------------------------------------

def harvested_energy(Q: EnergyCovariance | np.ndarray, g: np.ndarray, zeta: float, T: float) -> float:
    """收集能量

    Energy harvested over the block: T * zeta * tr(Q g g^H).
    """
    Qm = Q.Q if isinstance(Q, EnergyCovariance) else np.asarray(Q, dtype=complex)
    g = np.asarray(g, dtype=complex).reshape(-1)
    if Qm.ndim != 2 or Qm.shape != (g.size, g.size):
        raise InputError(f"dimension mismatch: Q {Qm.shape} vs g ({g.size},)")
    if not 0 < zeta <= 1:
        raise InputError(f"zeta must lie in (0, 1], got {zeta!r}")

    form = np.vdot(g, Qm @ g)
    if abs(form.imag) > IMAG_TOL * abs(form.real) + 1e-15:
        raise InputError("tr(Q g g^H) has a non-negligible imaginary part; Q is not Hermitian")
    return float(T * zeta * form.real)


def _perspective_exp2(bits: float, t: float, B: float) -> float:
    """t * (2^(bits / (t B)) - 1) with the zero-duration convention."""
    if t == 0:
        return 0.0 if bits == 0 else math.inf
    with np.errstate(over="ignore"):
        return float(t * np.expm1(bits / (t * B) * LN2))


def offload_tx_energy(ell: float, t1: float, B: float, h: float, sigma2: float) -> float:
    """卸载发射能耗

    User's transmit energy for offloading ``ell`` bits in ``t1`` seconds.
    """
    _require_nonneg(ell=ell, t1=t1)
    return _perspective_exp2(ell, t1, B) * sigma2 / h


def helper_compute_energy(ell: float, t2: float, xi: float, C: float) -> float:
    """助手计算能耗

    Energy to execute ``ell`` bits in ``t2`` seconds at a constant CPU frequency.
    """
    _require_nonneg(ell=ell, t2=t2)
    if t2 == 0:
        return 0.0 if ell == 0 else math.inf
    return float(xi * C**3 * ell**3 / t2**2)


def helper_tx_energy(ell: float, t3: float, beta: float, B: float, h: float, sigma2_user: float) -> float:
    """结果回传能耗

    Helper's transmit energy for returning ``beta * ell`` result bits.
    """
    _require_nonneg(ell=ell, t3=t3)
    return _perspective_exp2(beta * ell, t3, B) * sigma2_user / h


def user_compute_energy(ell0: float, T: float, xi0: float, C0: float) -> float:
    """用户本地计算能耗

    User's local computing energy over the whole block.
    """
    return helper_compute_energy(ell0, T, xi0, C0)


def cpu_frequency(ell: float, C: float, t: float) -> float:
    """CPU 频率

    Identical per-cycle CPU frequency that finishes C*ell cycles in t.
    """
    _require_nonneg(ell=ell, t=t)
    if t == 0:
        return 0.0 if ell == 0 else math.inf
    return float(C * ell / t)


def cycle_energy(frequencies, xi: float) -> float:
    """逐周期计算能耗

    Dynamic energy of a cycle-by-cycle frequency schedule: sum of xi * f^2.
    """
    f = np.asarray(frequencies, dtype=float)
    return float(xi * np.sum(f * f))


def offload_power(ell: float, t1: float, B: float, h: float, sigma2: float) -> float:
    """卸载发射功率

    User transmit power q_k that carries ``ell`` bits in ``t1`` seconds.
    """
    _require_nonneg(ell=ell, t1=t1)
    if t1 == 0:
        return 0.0 if ell == 0 else math.inf
    with np.errstate(over="ignore"):
        return float(np.expm1(ell / (t1 * B) * LN2) * sigma2 / h)


def result_power(ell: float, t3: float, beta: float, B: float, h: float, sigma2_user: float) -> float:
    """回传发射功率

    Helper transmit power p_k that returns ``beta * ell`` bits in ``t3`` seconds.
    """
    return offload_power(beta * ell, t3, B, h, sigma2_user)


def achievable_bits(t: float, B: float, h: float, power: float, sigma2: float) -> float:
    """可传输比特数

    Bits carried by a slot of length t at the given transmit power.
    """
    _require_nonneg(t=t, power=power)
    return float(t * B * math.log2(1.0 + h * power / sigma2))


def user_energy_demand(inst: Instance, ell: np.ndarray, t: np.ndarray) -> float:
    """用户能耗需求

    Offloading transmit energy plus local computing energy of the user.
    """
    total = user_compute_energy(float(ell[0]), inst.T, float(inst.xi[0]), float(inst.C[0]))
    for k in range(1, inst.K + 1):
        total += offload_tx_energy(
            float(ell[k]), float(t[k - 1, 0]), inst.B, float(inst.h[k - 1]), float(inst.sigma2[k])
        )
    return total


def helper_energy_demand(inst: Instance, k: int, ell_k: float, t_k: np.ndarray) -> float:
    """助手能耗需求

    Result-return transmit energy plus computing energy of helper k.
    """
    hp = inst.helper(k)
    return (
        helper_tx_energy(ell_k, float(t_k[2]), hp.beta, hp.B, hp.h, hp.sigma2_user)
        + helper_compute_energy(ell_k, float(t_k[1]), hp.xi, hp.C)
    )


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSlack:
    """约束松弛量

    Slack of one constraint; passes iff slack >= -tol_rel * scale.
    """
    name: str
    index: tuple[int, ...]
    slack: float
    scale: float
    passed: bool

    @property
    def label(self) -> str:
        if not self.index:
            return self.name
        return f"{self.name}[{','.join(str(i) for i in self.index)}]"


@dataclass
class FeasibilityReport:
    """可行性检查报告"""
    slacks: list[ConstraintSlack]
    tol_rel: float

    @property
    def feasible(self) -> bool:
        return all(s.passed for s in self.slacks)

    @property
    def violations(self) -> list[ConstraintSlack]:
        return [s for s in self.slacks if not s.passed]

    def by_name(self, name: str) -> list[ConstraintSlack]:
        return [s for s in self.slacks if s.name == name]

    def worst(self) -> Optional[ConstraintSlack]:
        if not self.slacks:
            return None
        return min(self.slacks, key=lambda s: s.slack / s.scale if math.isfinite(s.slack) else -math.inf)


def check_feasible(inst: Instance, sol: Solution, tol_rel: float = 1e-9) -> FeasibilityReport:
    """可行性检查

    Evaluate every constraint of the rate maximisation problem at ``sol``.
    """
    if sol.ell.shape != (inst.K + 1,) or sol.t.shape != (inst.K, 3) or sol.Q.N != inst.N:
        raise InputError("solution shape does not match the instance")

    slacks: list[ConstraintSlack] = []

    def add(name: str, index: tuple[int, ...], slack: float, rhs: float) -> None:
        scale = abs(rhs) if rhs != 0 else 1.0
        passed = bool(slack >= -tol_rel * scale) if not math.isnan(slack) else False
        slacks.append(ConstraintSlack(name=name, index=index, slack=float(slack), scale=scale, passed=passed))

    ell = np.maximum(sol.ell, 0.0)
    t = np.maximum(sol.t, 0.0)

    harvest0 = harvested_energy(sol.Q, inst.g[0], float(inst.zeta[0]), inst.T)
    add("user_energy", (), harvest0 - user_energy_demand(inst, ell, t), harvest0)

    for k in range(1, inst.K + 1):
        harvest_k = harvested_energy(sol.Q, inst.g[k], float(inst.zeta[k]), inst.T)
        add("helper_energy", (k,), harvest_k - helper_energy_demand(inst, k, ell[k], t[k - 1]), harvest_k)

    for k in range(1, inst.K + 1):
        add("time_budget", (k,), inst.T - float(np.sum(sol.t[k - 1])), inst.T)

    for k in range(inst.K + 1):
        add("bits_nonneg", (k,), float(sol.ell[k]), 0.0)

    for k in range(1, inst.K + 1):
        for i in range(3):
            tki = float(sol.t[k - 1, i])
            add("slot_bounds", (k, i + 1), min(tki, inst.T - tki), inst.T)

    add("power_budget", (), inst.P_max - sol.Q.trace, inst.P_max)

    min_eig = float(np.linalg.eigvalsh(sol.Q.Q)[0])
    add("covariance_psd", (), min_eig, sol.Q.trace)

    report = FeasibilityReport(slacks=slacks, tol_rel=tol_rel)
    if not report.feasible:
        logger.debug("infeasible solution: %s", ", ".join(s.label for s in report.violations))
    return report


def energy_breakdown(inst: Instance, sol: Solution) -> list[dict]:
    """能量明细

    Per-node harvested / transmit / computing energy (J).
    """
    rows: list[dict] = []
    ell = np.maximum(sol.ell, 0.0)
    t = np.maximum(sol.t, 0.0)

    harvest0 = harvested_energy(sol.Q, inst.g[0], float(inst.zeta[0]), inst.T)
    comp0 = user_compute_energy(float(ell[0]), inst.T, float(inst.xi[0]), float(inst.C[0]))
    tx0 = user_energy_demand(inst, ell, t) - comp0
    rows.append({"node": 0, "harvested": harvest0, "transmit": tx0, "compute": comp0,
                 "slack": harvest0 - tx0 - comp0})

    for k in range(1, inst.K + 1):
        hp = inst.helper(k)
        harvest = harvested_energy(sol.Q, inst.g[k], hp.zeta, inst.T)
        tx = helper_tx_energy(float(ell[k]), float(t[k - 1, 2]), hp.beta, hp.B, hp.h, hp.sigma2_user)
        comp = helper_compute_energy(float(ell[k]), float(t[k - 1, 1]), hp.xi, hp.C)
        rows.append({"node": k, "harvested": harvest, "transmit": tx, "compute": comp,
                     "slack": harvest - tx - comp})
    return rows
