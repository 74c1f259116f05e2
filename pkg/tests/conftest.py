import numpy as np
import pytest
from hypothesis import settings

from gdnls.spectral import Grid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# (number, title, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, title: str, passed: bool, detail: str):
    ACCEPTANCE_LINES.append((number, title, bool(passed), detail))


@pytest.fixture(scope="session")
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {detail}")


@pytest.fixture
def grid():
    return Grid(256, 40.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
