import numpy as np
import pytest

from rislens.channel import antenna_coupling
from rislens.geometry import Scenario
from rislens.profiles import antenna_compensation, assemble_w, random_profiles

LAMBDA_28GHZ = 299_792_458.0 / 28e9
DIAGONAL = np.ones(3) / np.sqrt(3)


@pytest.fixture(scope="session")
def full_scenario():
    return Scenario.from_carrier(28e9)


@pytest.fixture(scope="session")
def full_ris(full_scenario):
    return full_scenario.ris()


@pytest.fixture(scope="session")
def full_h_ant(full_scenario, full_ris):
    return antenna_coupling(full_scenario, full_ris)


@pytest.fixture(scope="session")
def small_scenario():
    """10x10 lens with 40 pilots; cheap enough for finite-difference oracles."""
    return Scenario.from_carrier(28e9, ris_rows=10, ris_cols=10, num_pilots=40)


@pytest.fixture
def random_w():
    def make(scenario, rng, T=None):
        ris = scenario.ris()
        h = antenna_coupling(scenario, ris)
        T = scenario.num_pilots if T is None else T
        return assemble_w(random_profiles(ris.size, T, rng), antenna_compensation(h), h)
    return make


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
