import math

import pytest
from hypothesis import HealthCheck, settings

from catcurve import load_example

settings.register_profile("numeric", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("numeric")


@pytest.fixture(scope="session")
def cusp():
    return load_example("cusp")


@pytest.fixture(scope="session")
def cusp_metric(cusp):
    return cusp.metrics[0]


@pytest.fixture(scope="session")
def line():
    return load_example("line")


@pytest.fixture(scope="session")
def line_metric(line):
    return line.metrics[0]


@pytest.fixture(scope="session")
def node():
    return load_example("node")


def cusp_radial_distance(r):
    """d(0, r) on y^2 = x^3: lam = 4 r^2 + 9 r^4 along the real axis."""
    return ((4 + 9 * r * r) ** 1.5 - 8) / 27


def polar(r, theta):
    return r * complex(math.cos(theta), math.sin(theta))
