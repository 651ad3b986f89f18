from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from courtrel._resources import data_path

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def data():
    return data_path
