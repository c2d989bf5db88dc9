#!/usr/bin/env python3
"""
Channel generation and Monte Carlo sweeps.

Every link draws from its own counter-based substream keyed by
(trial, link kind, node), so a trial sees the same underlying fading
whatever the swept value, scheme or helper count (common random numbers).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..constants import defaults as D
from ..errors import FeasibilityError, InputError, WptccError
from .model import Instance, Solution, check_feasible

logger = logging.getLogger(__name__)

LINK_ET = 0
LINK_USER_HELPER = 1

SWEEP_VARIABLES = ("T", "d_et_helpers", "d_user_helpers")
SWEEP_ALIASES = {"d_et_helper": "d_et_helpers", "d_user_helper": "d_user_helpers"}
SCHEMES = ("proposed", "equal_time", "local_only")


@dataclass(frozen=True)
class Geometry:
    """节点几何布局"""
    d_et_user: float
    d_et_helper: tuple[float, ...]
    d_user_helper: tuple[float, ...]
    pathloss_ref: float = D.PATHLOSS_REF
    exponent: float = D.PATHLOSS_EXPONENT

    def __post_init__(self):
        object.__setattr__(self, "d_et_helper", tuple(float(d) for d in self.d_et_helper))
        object.__setattr__(self, "d_user_helper", tuple(float(d) for d in self.d_user_helper))
        if len(self.d_et_helper) != len(self.d_user_helper):
            raise InputError("d_et_helper and d_user_helper must list the same helpers")
        if self.d_et_user <= 0 or any(d <= 0 for d in self.d_et_helper + self.d_user_helper):
            raise InputError("distances must be positive")
        if not 0 < self.pathloss_ref <= 1:
            raise InputError("pathloss_ref must lie in (0, 1]")

    @property
    def K(self) -> int:
        return len(self.d_et_helper)

    def gain(self, d: float) -> float:
        """Average power gain PL0 * d^-exponent."""
        return self.pathloss_ref * d ** (-self.exponent)


@dataclass(frozen=True)
class InstanceTemplate:
    """实例模板

    Everything an Instance needs except the channels.
    """
    N: int
    K: int
    T: float = D.BLOCK_DURATION
    B: float = D.BANDWIDTH
    beta: float = D.RESULT_RATIO
    P_max: float = D.MAX_TX_POWER
    zeta: float = D.EH_EFFICIENCY
    xi: float = D.SWITCH_CAPACITANCE
    C: float = D.CYCLES_PER_BIT
    sigma2: float = D.NOISE_POWER

    def build(self, g: np.ndarray, h: np.ndarray) -> Instance:
        return Instance(
            T=self.T, B=self.B, beta=self.beta, P_max=self.P_max,
            zeta=self.zeta, xi=self.xi, C=self.C, sigma2=self.sigma2,
            g=g, h=h,
        )


def canonical_sweep_variable(name: str) -> str:
    """扫描变量规范名（接受单数别名）"""
    return SWEEP_ALIASES.get(name, name)


def _link_rng(seed: int, trial: int, kind: int, k: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial, kind, k))
    return np.random.Generator(np.random.Philox(ss))


def _unit_cn(rng: np.random.Generator, size: int) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    z = rng.standard_normal((size, 2))
    return (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)


def sample_channels(geom: Geometry, template: InstanceTemplate, seed: int, trial: int = 0) -> Instance:
    """信道采样

    Rayleigh-faded instance with average gain PL0 * d^-exponent per link.
    """
    if geom.K != template.K:
        raise InputError(f"geometry has {geom.K} helpers, template has {template.K}")
    distances = (geom.d_et_user,) + geom.d_et_helper
    g = np.empty((template.K + 1, template.N), dtype=complex)
    for k, d in enumerate(distances):
        g[k] = math.sqrt(geom.gain(d)) * _unit_cn(_link_rng(seed, trial, LINK_ET, k), template.N)
    h = np.empty(template.K)
    for k, d in enumerate(geom.d_user_helper, start=1):
        c = math.sqrt(geom.gain(d)) * _unit_cn(_link_rng(seed, trial, LINK_USER_HELPER, k), 1)[0]
        h[k - 1] = abs(c) ** 2
    return template.build(g, h)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    """扫描配置"""
    variable: str
    values: tuple[float, ...]
    trials: int = 1
    seed: int = 0
    schemes: tuple[str, ...] = SCHEMES

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "variable", canonical_sweep_variable(self.variable))
        if self.variable not in SWEEP_VARIABLES:
            raise InputError(f"unknown sweep variable {self.variable!r}; expected one of {SWEEP_VARIABLES}")
        if not self.values:
            raise InputError("sweep needs at least one value")
        if any(v <= 0 for v in self.values) or list(self.values) != sorted(self.values):
            raise InputError("sweep values must be positive and ascending")
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise InputError(f"unknown schemes {unknown}; expected a subset of {SCHEMES}")


@dataclass(frozen=True)
class TrialFailure:
    """失败试验记录"""
    value: float
    trial: int
    scheme: str
    error: str
    message: str


@dataclass(frozen=True)
class SweepRow:
    """扫描结果行"""
    sweep_var: str
    sweep_value: float
    scheme: str
    trials: int
    mean_bits: float
    stderr_bits: float
    mean_gap: float
    failures: int


@dataclass
class SweepTable:
    """扫描结果表"""
    config: SweepConfig
    rows: list[SweepRow] = field(default_factory=list)
    failures: list[TrialFailure] = field(default_factory=list)
    samples: dict[tuple[float, str], list[float]] = field(default_factory=dict)

    def row(self, value: float, scheme: str) -> SweepRow:
        for r in self.rows:
            if r.sweep_value == value and r.scheme == scheme:
                return r
        raise KeyError((value, scheme))

    def series(self, scheme: str) -> list[float]:
        return [r.mean_bits for r in self.rows if r.scheme == scheme]


SchemeRunner = Callable[[str, Instance], Solution]


def apply_sweep_value(
    variable: str, value: float, template: InstanceTemplate, geom: Geometry
) -> tuple[InstanceTemplate, Geometry]:
    """应用扫描取值"""
    variable = canonical_sweep_variable(variable)
    if variable == "T":
        return replace(template, T=value), geom
    if variable == "d_et_helpers":
        return template, replace(geom, d_et_helper=(value,) * geom.K)
    if variable == "d_user_helpers":
        return template, replace(geom, d_user_helper=(value,) * geom.K)
    raise InputError(f"unknown sweep variable {variable!r}")


def _default_runner() -> SchemeRunner:
    from ..solver import CooperativeSolver

    return CooperativeSolver().run_scheme


def _run_trial(
    cfg: SweepConfig,
    runner: SchemeRunner,
    template: InstanceTemplate,
    geom: Geometry,
    value: float,
    trial: int,
) -> dict[str, object]:
    """Objective (or failure) of every scheme plus the local-only reference."""
    tpl, gm = apply_sweep_value(cfg.variable, value, template, geom)
    inst = sample_channels(gm, tpl, cfg.seed, trial)
    outcome: dict[str, object] = {}
    for scheme in dict.fromkeys(cfg.schemes + ("local_only",)):
        try:
            sol = runner(scheme, inst)
            report = check_feasible(inst, sol, D.FEASIBILITY_TOL)
            if not report.feasible:
                raise FeasibilityError(
                    f"{scheme} returned an infeasible solution: "
                    + ", ".join(s.label for s in report.violations)
                )
            outcome[scheme] = sol.objective
        except WptccError as exc:
            logger.warning("value=%g trial=%d scheme=%s failed: %s", value, trial, scheme, exc)
            outcome[scheme] = TrialFailure(value, trial, scheme, type(exc).__name__, str(exc))
    return outcome


def run_sweep(
    cfg: SweepConfig,
    template: InstanceTemplate,
    geom: Geometry,
    runner: Optional[SchemeRunner] = None,
    threads: int = 1,
) -> SweepTable:
    """运行参数扫描

    Average every scheme over ``cfg.trials`` channel draws per swept value.
    """
    runner = runner or _default_runner()
    tasks = [(value, trial) for value in cfg.values for trial in range(cfg.trials)]
    logger.info("sweep %s over %d values x %d trials (%d threads)",
                cfg.variable, len(cfg.values), cfg.trials, threads)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda vt: _run_trial(cfg, runner, template, geom, *vt), tasks))
    else:
        outcomes = [_run_trial(cfg, runner, template, geom, v, t) for v, t in tasks]

    table = SweepTable(config=cfg)
    by_task = dict(zip(tasks, outcomes))
    for value in cfg.values:
        for scheme in cfg.schemes:
            bits, gaps = [], []
            failures = 0
            for trial in range(cfg.trials):
                out = by_task[(value, trial)]
                res = out[scheme]
                if isinstance(res, TrialFailure):
                    failures += 1
                    table.failures.append(res)
                    continue
                bits.append(float(res))
                ref = out["local_only"]
                if not isinstance(ref, TrialFailure):
                    gaps.append(float(res) - float(ref))
            table.samples[(value, scheme)] = bits
            arr = np.asarray(bits)
            table.rows.append(SweepRow(
                sweep_var=cfg.variable,
                sweep_value=value,
                scheme=scheme,
                trials=cfg.trials,
                mean_bits=float(arr.mean()) if arr.size else math.nan,
                stderr_bits=float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0,
                mean_gap=float(np.mean(gaps)) if gaps else math.nan,
                failures=failures,
            ))
    return table
