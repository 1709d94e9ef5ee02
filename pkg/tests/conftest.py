import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ghostscatter.optics import SamplingWarning

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_sampling():
    # long-distance propagation warnings are expected in the paraxial presets
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


DATA = Path(__file__).parent / "data"


@pytest.fixture
def tiny_text():
    """A small two-mode double-slit scene that runs in well under a second."""
    return (DATA / "tiny.ini").read_text()


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, whichever way the module was imported
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
