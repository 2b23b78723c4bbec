import math

import pytest

from floqlin.classical import ModelParams, find_limit_cycle
from floqlin.floquet import build_floquet_system

ROOT_04 = math.sqrt(0.4)
ROOT_01 = math.sqrt(0.1)


@pytest.fixture(scope="session")
def free_cycle():
    """Undriven cycle at Delta = sqrt(0.4): the analytically known circle."""
    return find_limit_cycle(ModelParams(F=0.0, Delta=ROOT_04))


@pytest.fixture(scope="session")
def free_system(free_cycle):
    return build_floquet_system(free_cycle)


@pytest.fixture(scope="session")
def driven_cycle():
    """The driven benchmark cycle (F = sqrt(0.1), Delta = sqrt(0.4))."""
    return find_limit_cycle(ModelParams(F=ROOT_01, Delta=ROOT_04))


@pytest.fixture(scope="session")
def driven_system(driven_cycle):
    return build_floquet_system(driven_cycle)
