import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion: ``acceptance(number, title, checks, seconds)``.

    ``checks`` maps a short description to ``(passed, detail)``. The line is
    printed immediately and again in the terminal summary.
    """

    def record(number: int, title: str, checks: dict, seconds: float) -> None:
        ok = all(passed for passed, _ in checks.values())
        failed = [f"{name} ({detail})" for name, (passed, detail) in checks.items() if not passed]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({seconds:.1f} s)"
        if failed:
            line += " | failed: " + "; ".join(failed)
        request.config.stash[_ACCEPTANCE].append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
