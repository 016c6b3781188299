import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsflab.thermo import ThermoModel, linearization_coeffs

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return ThermoModel()


@pytest.fixture(scope="session")
def coeffs(model):
    return linearization_coeffs(model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
