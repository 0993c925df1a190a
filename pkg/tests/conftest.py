import numpy as np
import pytest

from pebm.grid import make_grid


class AcceptanceLog:
    """Collects one PASS/FAIL line per acceptance check for the final report."""

    def __init__(self):
        self.lines = []

    def record(self, ok: bool, label: str, detail: str) -> bool:
        line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {label} -- {detail}"
        self.lines.append(line)
        print(line)
        return ok


ACCEPTANCE = AcceptanceLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE.lines:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE.lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


@pytest.fixture
def grid8():
    """Small grid for operator tests."""
    return make_grid(8, 8, 4, 1e-3)


@pytest.fixture
def grid16():
    """Reference resolution used by the flux-cancellation properties."""
    return make_grid(16, 16, 8, 1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
