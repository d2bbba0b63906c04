from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from fsdiffusion.fsdist import FsParams

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def p520() -> FsParams:
    return FsParams(5, 20, 1.0)


@pytest.fixture
def p520h() -> FsParams:
    return FsParams(5, 20, 0.5)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def record_criterion(request):
    """Record one acceptance line; it is printed in the terminal summary."""
    rows = request.config.stash[ACCEPTANCE]

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        rows.append((number, title, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {number:2d}  {'PASS' if passed else 'FAIL'}  {title}: {detail}")
