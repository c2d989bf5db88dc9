#!/usr/bin/env python3
"""
Unified solver configuration.

Resolution order for every field: explicit argument, then environment
variable, then the `[solver]` section of a config file, then the built-in
default.

Environment variables:
  - WPTCC_THREADS            worker threads for sweeps / verification
  - WPTCC_LAMBDA_MIN         floor of the energy multipliers
  - WPTCC_MAX_ITER_PER_DIM   ellipsoid iteration cap per dual dimension
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from typing import Any, Callable, Mapping

try:
    from .constants import defaults as D
    from .errors import ConfigError
except ImportError:
    from constants import defaults as D
    from errors import ConfigError


ENV_THREADS = "WPTCC_THREADS"
ENV_LAMBDA_MIN = "WPTCC_LAMBDA_MIN"
ENV_MAX_ITER_PER_DIM = "WPTCC_MAX_ITER_PER_DIM"


def _env(name: str, cast: Callable[[str], Any]) -> Any | None:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return None
    try:
        return cast(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"environment variable {name}={raw!r} is not a valid value", key=name) from exc


def _first(*values: Any) -> Any:
    for v in values:
        if v is not None:
            return v
    return None


@dataclass(frozen=True)
class SolverConfig:
    lambda_min: float = D.LAMBDA_MIN
    radius0: float = D.ELLIPSOID_RADIUS
    vol_tol: float = D.ELLIPSOID_VOL_TOL
    gap_tol: float = D.ELLIPSOID_GAP_TOL
    max_iter_per_dim: int = D.ELLIPSOID_ITER_PER_DIM
    barrier_tol: float = D.BARRIER_TOL
    barrier_mu: float = D.BARRIER_MU
    line_search_alpha: float = D.LINE_SEARCH_ALPHA
    line_search_beta: float = D.LINE_SEARCH_BETA
    threads: int = 1

    @classmethod
    def resolve(
        cls,
        *,
        lambda_min: float | None = None,
        radius0: float | None = None,
        vol_tol: float | None = None,
        gap_tol: float | None = None,
        max_iter_per_dim: int | None = None,
        barrier_tol: float | None = None,
        barrier_mu: float | None = None,
        line_search_alpha: float | None = None,
        line_search_beta: float | None = None,
        threads: int | None = None,
        file_values: Mapping[str, Any] | None = None,
    ) -> "SolverConfig":
        fv = dict(file_values or {})
        base = cls()

        cfg = cls(
            lambda_min=float(_first(lambda_min, _env(ENV_LAMBDA_MIN, float), fv.get("lambda_min"), base.lambda_min)),
            radius0=float(_first(radius0, fv.get("radius0"), base.radius0)),
            vol_tol=float(_first(vol_tol, fv.get("vol_tol"), base.vol_tol)),
            gap_tol=float(_first(gap_tol, fv.get("gap_tol"), base.gap_tol)),
            max_iter_per_dim=int(_first(
                max_iter_per_dim, _env(ENV_MAX_ITER_PER_DIM, int), fv.get("max_iter_per_dim"), base.max_iter_per_dim
            )),
            barrier_tol=float(_first(barrier_tol, fv.get("barrier_tol"), base.barrier_tol)),
            barrier_mu=float(_first(barrier_mu, fv.get("barrier_mu"), base.barrier_mu)),
            line_search_alpha=float(_first(line_search_alpha, fv.get("line_search_alpha"), base.line_search_alpha)),
            line_search_beta=float(_first(line_search_beta, fv.get("line_search_beta"), base.line_search_beta)),
            threads=max(1, int(_first(threads, _env(ENV_THREADS, int), fv.get("threads"), base.threads))),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.lambda_min > 0:
            raise ConfigError("lambda_min must be positive", key="lambda_min")
        if not self.radius0 > 0:
            raise ConfigError("radius0 must be positive", key="radius0")
        if not 0 < self.vol_tol < 1:
            raise ConfigError("vol_tol must lie in (0, 1)", key="vol_tol")
        if not self.gap_tol >= 0:
            raise ConfigError("gap_tol must be non-negative", key="gap_tol")
        if self.max_iter_per_dim < 1:
            raise ConfigError("max_iter_per_dim must be at least 1", key="max_iter_per_dim")
        if not self.barrier_tol > 0:
            raise ConfigError("barrier_tol must be positive", key="barrier_tol")
        if not self.barrier_mu > 1:
            raise ConfigError("barrier_mu must exceed 1", key="barrier_mu")
        if not 0 < self.line_search_alpha < 0.5:
            raise ConfigError("line_search_alpha must lie in (0, 0.5)", key="line_search_alpha")
        if not 0 < self.line_search_beta < 1:
            raise ConfigError("line_search_beta must lie in (0, 1)", key="line_search_beta")

    def max_iter(self, dim: int) -> int:
        return self.max_iter_per_dim * dim

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)
