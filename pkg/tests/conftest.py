import pytest
from hypothesis import HealthCheck, settings

from pcpsense.config import RunConfig
from pcpsense.motor import bench_gearbox, bench_motor, bench_vf_law
from pcpsense.plant import Plant

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def motor():
    return bench_motor()


@pytest.fixture(scope="session")
def gearbox():
    return bench_gearbox()


@pytest.fixture(scope="session")
def vf():
    return bench_vf_law()


@pytest.fixture(scope="session")
def plant(motor, gearbox, vf):
    return Plant(motor, gearbox, vf)


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
