import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DELTA0 = 2 * np.pi * 0.007


@pytest.fixture
def delta0():
    return DELTA0


_CRITERIA_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = []


@pytest.fixture
def report(request):
    """Record one acceptance line: ``report(n, passed, detail)``."""
    lines = request.config.stash[_CRITERIA_KEY]

    def _report(n, passed, detail):
        line = f"CRITERION {n} {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
