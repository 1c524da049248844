import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "hullscope", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("hullscope")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
