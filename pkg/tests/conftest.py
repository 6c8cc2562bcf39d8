import numpy as np
import pytest

from lpstab import mhd2d, satellite


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sat_params():
    return satellite.SatelliteParams()


@pytest.fixture(scope="session")
def sat_sys(sat_params):
    return satellite.build_satellite(sat_params)


@pytest.fixture(scope="session")
def cfg8():
    return mhd2d.ChannelConfig(Nx=8, Ny=8)


@pytest.fixture(scope="session")
def mhd_sys(cfg8):
    return mhd2d.build_mhd_system(cfg8)


@pytest.fixture(scope="session")
def oracle8(cfg8):
    return mhd2d.DenseOracle(cfg8)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
