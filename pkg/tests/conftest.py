from __future__ import annotations

import numpy as np
import pytest

from sasclab import koopman, world
from sasclab.config import LabConfig, PhysicsParams


@pytest.fixture(scope="session")
def params() -> PhysicsParams:
    return PhysicsParams()


@pytest.fixture(scope="session")
def config() -> LabConfig:
    return LabConfig()


@pytest.fixture(scope="session")
def open_env(params):
    return world.make_environment(world.EnvId.OPEN, params, 0)


@pytest.fixture(scope="session")
def narrow_env(params):
    return world.make_environment(world.EnvId.NARROW, params, 0)


@pytest.fixture(scope="session")
def dynamic_env(params):
    return world.make_environment(world.EnvId.DYNAMIC, params, 3)


@pytest.fixture(scope="session")
def fitted_model(params) -> koopman.KoopmanModel:
    """Model fit on 4000 in-envelope simulator transitions."""
    data = koopman.sample_transitions(4000, seed=11, params=params)
    return koopman.fit(data, ridge=1e-6)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
