import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbgshape.core import CalibrationSet, load_config, symmetric_geometry

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def geometry(cfg):
    return cfg.geometry


@pytest.fixture(scope="session")
def sym_geometry(cfg):
    return symmetric_geometry(cfg.geometry)


@pytest.fixture(scope="session")
def cdm(cfg):
    return cfg.cdm


@pytest.fixture(scope="session")
def identity():
    return CalibrationSet()


@pytest.fixture(autouse=True)
def _no_config_env(monkeypatch):
    monkeypatch.delenv("FBGSHAPE_CONFIG", raising=False)


def nominal_geometry(g):
    """The uncalibrated starting point: design radius and a 60 deg layout."""
    return g.replace(r=np.full((2, 3), 0.133), theta=np.full((2, 3), np.radians(60.0)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
