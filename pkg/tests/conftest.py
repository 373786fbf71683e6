import numpy as np
import pytest

from fuzzydesc import sim, synth
from fuzzydesc.model import load_fixture, with_bounds

X0 = [[1.0, -1.0], [-1.0, 0.5]]
MID_BOUND = -0.3


@pytest.fixture(scope="session")
def net():
    return load_fixture()


@pytest.fixture(scope="session")
def net_mid(net):
    return with_bounds(net, MID_BOUND, MID_BOUND)


@pytest.fixture(scope="session")
def cor1(net):
    return synth.synthesize(net, "corollary1")


@pytest.fixture(scope="session")
def th1_mid(net_mid):
    return synth.synthesize(net_mid, "theorem1")


@pytest.fixture(scope="session")
def cor1_traj(net, cor1):
    return sim.simulate(net, cor1, X0, dt=1e-3, T=10.0)


@pytest.fixture(scope="session")
def cor1_traj_half(net, cor1):
    return sim.simulate(net, cor1, X0, dt=5e-4, T=10.0)


@pytest.fixture(scope="session")
def th1_traj(net_mid, th1_mid):
    return sim.simulate(net_mid, th1_mid, X0, dt=1e-3, T=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
