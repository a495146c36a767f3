import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numba dispatch makes first calls slow; deadlines would only measure compilation
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_REPORT = []


@pytest.fixture
def acceptance_report():
    """Collects one ``(criterion, passed, detail)`` line per acceptance check."""
    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        _REPORT.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_REPORT, key=lambda r: r[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
