from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest


PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from scripts.core.model import Instance  # noqa: E402
from scripts.core.scenarios import Geometry, InstanceTemplate, sample_channels  # noqa: E402


def make_instance(N: int = 4, K: int = 3, seed: int = 7, trial: int = 0, **overrides) -> Instance:
    """Default parameter set with Rayleigh channels at the default geometry."""
    d_user_helper = overrides.pop("d_user_helper", (2.0, 3.0, 5.0)[:K] if K <= 3 else (2.0,) * K)
    geom = Geometry(
        d_et_user=overrides.pop("d_et_user", 5.0),
        d_et_helper=overrides.pop("d_et_helper", (5.0,) * K),
        d_user_helper=d_user_helper,
    )
    template = InstanceTemplate(N=N, K=K, **overrides)
    return sample_channels(geom, template, seed, trial)


@pytest.fixture
def default_instance() -> Instance:
    return make_instance()


@pytest.fixture
def single_helper_instance() -> Instance:
    return make_instance(N=2, K=1, seed=3)


@pytest.fixture
def local_instance() -> Instance:
    return make_instance(N=4, K=0, seed=11)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
