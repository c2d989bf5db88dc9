"""
Pydantic 配置模型

One model per config-file section. Explicit channel vectors (``g0``,
``g1``, ...) are parsed by ``config_file`` and checked against ``N``/``K``
there; everything else is validated here.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

try:
    from .constants import defaults as D
    from .core.scenarios import SWEEP_ALIASES
except ImportError:
    from constants import defaults as D
    from core.scenarios import SWEEP_ALIASES


SchemeName = Literal["proposed", "equal_time", "local_only"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InstanceSection(_Section):
    """[instance] 问题实例"""
    N: int = Field(..., ge=1, description="ET 天线数")
    K: int = Field(..., ge=0, description="助手数量")
    T: float = Field(..., gt=0, description="时间块长度 (s)")
    B: float = Field(default=D.BANDWIDTH, gt=0, description="每对用户-助手带宽 (Hz)")
    beta: float = Field(default=D.RESULT_RATIO, gt=0, description="结果比特 / 输入比特")
    P_max: float = Field(default=D.MAX_TX_POWER, ge=0, description="ET 最大发射功率 (W)")
    zeta: float = Field(default=D.EH_EFFICIENCY, gt=0, le=1, description="能量收集效率")
    xi: float = Field(default=D.SWITCH_CAPACITANCE, gt=0, description="CPU 有效开关电容")
    C: float = Field(default=D.CYCLES_PER_BIT, gt=0, description="每比特 CPU 周期数")
    sigma2: float = Field(default=D.NOISE_POWER, gt=0, description="噪声功率 (W)")
    seed: int = Field(default=0, ge=0, description="信道随机种子")
    trial: int = Field(default=0, ge=0, description="信道子流编号")
    h: Optional[list[float]] = Field(default=None, description="用户-助手信道功率增益（留空则随机生成）")
    schemes: list[SchemeName] = Field(
        default_factory=lambda: ["proposed", "equal_time", "local_only"],
        min_length=1,
        description="求解方案",
    )

    @field_validator("h")
    @classmethod
    def _check_h(cls, h: Optional[list[float]], info: ValidationInfo) -> Optional[list[float]]:
        if h is None:
            return h
        K = info.data.get("K")
        if K is not None and len(h) != K:
            raise ValueError(f"h must list {K} gains, got {len(h)}")
        if any(v <= 0 for v in h):
            raise ValueError("h must be positive")
        return h


class GeometrySection(_Section):
    """[geometry] 节点距离与路损"""
    d_et_user: float = Field(default=D.ET_USER_DISTANCE, gt=0, description="ET-用户距离 (m)")
    d_et_helper: Optional[list[float]] = Field(default=None, description="ET-助手距离 (m)")
    d_user_helper: Optional[list[float]] = Field(default=None, description="用户-助手距离 (m)")
    pathloss_ref: float = Field(default=D.PATHLOSS_REF, gt=0, le=1, description="参考路损 PL0")
    exponent: float = Field(default=D.PATHLOSS_EXPONENT, gt=0, description="路损指数")

    def resolved(self, K: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Helper distances for K helpers; defaults cycle through the built-in lists."""
        et = tuple(self.d_et_helper) if self.d_et_helper is not None else (D.ET_HELPER_DISTANCE,) * K
        if self.d_user_helper is not None:
            uh = tuple(self.d_user_helper)
        else:
            base = D.USER_HELPER_DISTANCES
            uh = tuple(base[i % len(base)] for i in range(K))
        return et, uh


class SolverSection(_Section):
    """[solver] 数值参数（留空则使用环境变量或默认值）"""
    lambda_min: Optional[float] = Field(default=None, gt=0)
    radius0: Optional[float] = Field(default=None, gt=0)
    vol_tol: Optional[float] = Field(default=None, gt=0, lt=1)
    gap_tol: Optional[float] = Field(default=None, ge=0)
    max_iter_per_dim: Optional[int] = Field(default=None, ge=1)
    barrier_tol: Optional[float] = Field(default=None, gt=0)
    barrier_mu: Optional[float] = Field(default=None, gt=1)
    line_search_alpha: Optional[float] = Field(default=None, gt=0, lt=0.5)
    line_search_beta: Optional[float] = Field(default=None, gt=0, lt=1)
    threads: Optional[int] = Field(default=None, ge=1)


class SweepSection(_Section):
    """[sweep] 蒙特卡洛扫描"""
    variable: Literal["T", "d_et_helpers", "d_user_helpers", "d_et_helper", "d_user_helper"] = Field(
        ..., description="扫描变量（单数写法为别名）"
    )
    values: list[float] = Field(..., min_length=1, description="扫描取值（升序）")
    trials: int = Field(default=1, ge=1, description="每个取值的信道实现数")
    seed: int = Field(default=0, ge=0, description="随机种子")
    schemes: list[SchemeName] = Field(
        default_factory=lambda: ["proposed", "equal_time", "local_only"],
        min_length=1,
        description="参与比较的方案",
    )

    @field_validator("variable")
    @classmethod
    def _canonical_variable(cls, name: str) -> str:
        return SWEEP_ALIASES.get(name, name)

    @field_validator("values")
    @classmethod
    def _check_values(cls, values: list[float]) -> list[float]:
        if any(v <= 0 for v in values):
            raise ValueError("values must be positive")
        if values != sorted(values):
            raise ValueError("values must be ascending")
        return values


class VerifySection(_Section):
    """[verify] 与穷举搜索对比"""
    seeds: int = Field(..., ge=1, description="随机实例数量")
    seed_start: int = Field(default=0, ge=0, description="第一个种子")
    grid_t1: int = Field(default=200, ge=2, description="t1 网格分辨率")
    grid_t2: int = Field(default=200, ge=2, description="t2 网格分辨率")
    grid_ell1: int = Field(default=400, ge=2, description="ell_1 网格区间数")
    oracle_tol: float = Field(default=D.ORACLE_TOL, gt=0, description="相对偏差上限")
    gap_tol: float = Field(default=D.GAP_TOL, gt=0, description="相对对偶间隙上限")
    kkt_tol: float = Field(default=D.KKT_TOL, gt=0, description="KKT 残差上限")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return (self.grid_t1, self.grid_t2, self.grid_ell1)


class RunConfig(BaseModel):
    """完整配置"""
    instance: InstanceSection
    geometry: GeometrySection = Field(default_factory=GeometrySection)
    solver: SolverSection = Field(default_factory=SolverSection)
    sweep: Optional[SweepSection] = None
    verify: Optional[VerifySection] = None

    @model_validator(mode="after")
    def _check_geometry(self) -> "RunConfig":
        K = self.instance.K
        for name in ("d_et_helper", "d_user_helper"):
            values = getattr(self.geometry, name)
            if values is None:
                continue
            if len(values) != K:
                raise ValueError(f"geometry.{name} must list {K} distances, got {len(values)}")
            if any(v <= 0 for v in values):
                raise ValueError(f"geometry.{name} must be positive")
        return self
