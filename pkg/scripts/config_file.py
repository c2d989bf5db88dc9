#!/usr/bin/env python3
"""
Config-file reader.

Format::

    # comment
    [instance]
    N = 4
    K = 1
    T = 0.1
    g0 = 1e-3+2e-4j, -5e-4j, 3e-4, 1e-4-1e-4j   # optional explicit channels
    g1 = ...
    h = 1e-4

    [sweep]
    variable = T
    values = 0.02, 0.04, 0.06

Sections: instance, geometry, solver, sweep, verify. Arrays are
comma-separated. Any parse or validation problem raises ``ConfigError``
naming the offending key.
"""

from __future__ import annotations

import configparser
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

try:
    from .config_solver import SolverConfig
    from .errors import ConfigError
    from .schemas import RunConfig
    from .core.model import Instance
    from .core.scenarios import Geometry, InstanceTemplate, sample_channels
except ImportError:
    from config_solver import SolverConfig
    from errors import ConfigError
    from schemas import RunConfig
    from core.model import Instance
    from core.scenarios import Geometry, InstanceTemplate, sample_channels

logger = logging.getLogger(__name__)

SECTIONS = ("instance", "geometry", "solver", "sweep", "verify")
LIST_KEYS = {
    ("instance", "h"),
    ("instance", "schemes"),
    ("geometry", "d_et_helper"),
    ("geometry", "d_user_helper"),
    ("sweep", "values"),
    ("sweep", "schemes"),
}
CHANNEL_KEY = re.compile(r"^g(\d+)$")


@dataclass(frozen=True)
class LoadedConfig:
    path: Path
    run: RunConfig
    g: Optional[np.ndarray] = None

    def template(self) -> InstanceTemplate:
        i = self.run.instance
        return InstanceTemplate(
            N=i.N, K=i.K, T=i.T, B=i.B, beta=i.beta, P_max=i.P_max,
            zeta=i.zeta, xi=i.xi, C=i.C, sigma2=i.sigma2,
        )

    def geometry(self) -> Geometry:
        geo = self.run.geometry
        et, uh = geo.resolved(self.run.instance.K)
        return Geometry(
            d_et_user=geo.d_et_user, d_et_helper=et, d_user_helper=uh,
            pathloss_ref=geo.pathloss_ref, exponent=geo.exponent,
        )

    def solver_config(self, **explicit: Any) -> SolverConfig:
        values = self.run.solver.model_dump(exclude_none=True)
        return SolverConfig.resolve(file_values=values, **explicit)

    def instance(self) -> Instance:
        """The single instance of ``[instance]``: explicit channels where given, sampled otherwise."""
        section = self.run.instance
        inst = sample_channels(self.geometry(), self.template(), section.seed, section.trial)
        g = self.g if self.g is not None else inst.g
        h = np.asarray(section.h, dtype=float) if section.h is not None else inst.h
        return self.template().build(g, h)

    def echo(self) -> dict[str, Any]:
        """Every resolved parameter, defaults included."""
        data = self.run.model_dump()
        et, uh = self.run.geometry.resolved(self.run.instance.K)
        data["geometry"]["d_et_helper"] = list(et)
        data["geometry"]["d_user_helper"] = list(uh)
        data["solver"] = self.solver_config().as_dict()
        if self.g is not None:
            data["instance"]["g"] = [[repr(complex(v)) for v in row] for row in self.g]
        return {k: v for k, v in data.items() if v is not None}


def _split(raw: str) -> list[str]:
    raw = raw.strip()
    if not raw:
        return []
    return [item.strip() for item in raw.split(",")]


def _parse_channel(key: str, raw: str) -> np.ndarray:
    items = _split(raw)
    if not items:
        raise ConfigError(f"{key} is empty", key=f"instance.{key}")
    try:
        return np.array([complex(item.replace(" ", "")) for item in items], dtype=complex)
    except ValueError as exc:
        raise ConfigError(f"{key} holds an invalid complex literal: {raw!r}", key=f"instance.{key}") from exc


def _collect_channels(values: dict[str, str], N: int, K: int) -> Optional[np.ndarray]:
    rows = {int(m.group(1)): _parse_channel(key, values.pop(key))
            for key in list(values) if (m := CHANNEL_KEY.match(key))}
    if not rows:
        return None
    expected = set(range(K + 1))
    if set(rows) != expected:
        missing = sorted(expected - set(rows))
        key = f"instance.g{missing[0]}" if missing else f"instance.g{max(rows)}"
        raise ConfigError(f"explicit channels need exactly g0..g{K}", key=key)
    for k, row in rows.items():
        if row.size != N:
            raise ConfigError(f"g{k} must have {N} entries, got {row.size}", key=f"instance.g{k}")
    return np.vstack([rows[k] for k in range(K + 1)])


def _validation_key(exc: ValidationError) -> str:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err.get("loc", ()) if not isinstance(p, int))
    return loc or "config"


def read_sections(path: Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        empty_lines_in_values=False,
    )
    parser.optionxform = str  # keys are case sensitive (N, K, T, P_max)
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(str(exc), key=f"{exc.section}.{exc.option}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]; expected one of {SECTIONS}", key=unknown[0])
    return {s: dict(parser.items(s)) for s in parser.sections()}


def load_config(path: str | Path) -> LoadedConfig:
    path = Path(path)
    sections = read_sections(path)
    if "instance" not in sections:
        raise ConfigError("missing required section [instance]", key="instance")

    raw_instance = sections["instance"]
    sizes: dict[str, int] = {}
    for key in ("N", "K"):
        if key not in raw_instance:
            raise ConfigError(f"missing required key {key}", key=f"instance.{key}")
        try:
            sizes[key] = int(raw_instance[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {raw_instance[key]!r}", key=f"instance.{key}") from exc
    N, K = sizes["N"], sizes["K"]
    g = _collect_channels(raw_instance, N, K)

    data: dict[str, dict[str, Any]] = {}
    for section, values in sections.items():
        data[section] = {
            key: (_split(value) if (section, key) in LIST_KEYS else value)
            for key, value in values.items()
        }

    for name in ("d_et_helper", "d_user_helper"):
        values = data.get("geometry", {}).get(name)
        if values is not None and len(values) != K:
            raise ConfigError(f"{name} must list {K} distances, got {len(values)}", key=f"geometry.{name}")

    try:
        run = RunConfig.model_validate(data)
    except ValidationError as exc:
        key = _validation_key(exc)
        msg = exc.errors()[0].get("msg", str(exc))
        raise ConfigError(f"{key}: {msg}", key=key) from exc

    logger.info("loaded %s (N=%d, K=%d, sections: %s)", path, N, K, ", ".join(sections))
    return LoadedConfig(path=path, run=run, g=g)
