import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from asympheat.spaces import AsymptoticChart, RemainderField, n_star
from asympheat.sphere import SphereFunction, mode_count

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical experiment")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_chart(rng, d, n, N, p, L, scale=1.0):
    Ns = n_star(N, d, p)
    return AsymptoticChart(
        d, n, N, Ns, [SphereFunction(d, L, scale * rng.normal(size=mode_count(d, L))) for _ in range(n, Ns + 1)], p
    )


def gaussian_field(d, n, half_width, width=1.0, shift=0.0):
    g = RemainderField.box(d, n, half_width)
    X = g.mesh()
    r2 = (X[0] - shift) ** 2 + sum(x * x for x in X[1:])
    return g.like(np.exp(-r2 / (2 * width**2)))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
