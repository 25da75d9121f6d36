import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from precession.protocol import AngleSet

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_admissible(rng: np.random.Generator, K: int) -> AngleSet:
    """Random sorted angle set obeying the half-way partner condition."""
    idx = (np.arange(K) + (K - 1) // 2) % K
    while True:
        a = np.sort(rng.uniform(0, 2 * np.pi, K))
        if np.all(np.mod(a[idx] - a, 2 * np.pi) <= np.pi):
            return AngleSet(a)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
