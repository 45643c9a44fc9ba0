import sys

import numpy as np
import pytest

from cganeb.simulate import FunctionalForm, SimConfig, simulate_dataset


@pytest.fixture(scope="session")
def e1_large():
    """E1 data-generating process at n = 20000."""
    return simulate_dataset(SimConfig(0.5, 0.5, FunctionalForm.LOG_LINEAR, n_sites=20000, seed=20240))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.format_results():
        terminalreporter.write_line(line)
