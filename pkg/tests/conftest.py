import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cistgcn.model import ModelConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_config():
    """A small model that still exercises every block."""
    return ModelConfig(t1=6, t2=5, joints=4, hidden=8, encoder_depth=2, seed=3)
