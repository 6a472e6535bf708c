import numpy as np
import pytest

from pmcfol.ambient import DataFamily, default_perturbation
from pmcfol.spectral import SphericalGrid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid31():
    return SphericalGrid(31)


@pytest.fixture(scope="session")
def grid15():
    return SphericalGrid(15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def flat():
    return DataFamily(metric_kind="euclidean", sigma=0.1)


@pytest.fixture(scope="session")
def schwarzschild():
    return DataFamily(mass=1.0)


@pytest.fixture(scope="session")
def york():
    return DataFamily(mass=1.0, k_kind="york", momentum=(0.0, 0.0, 0.1))


@pytest.fixture(scope="session")
def perturbed():
    return DataFamily(
        mass=1.0,
        metric_kind="schwarzschild_plus_perturbation",
        perturbation=default_perturbation(1e-3),
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
