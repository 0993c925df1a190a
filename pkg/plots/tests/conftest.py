"""Shared fixtures: paths to the committed golden artifacts."""

from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def energy_csv() -> Path:
    return FIXTURES / "energy.csv"


@pytest.fixture(scope="session")
def difference_csv() -> Path:
    return FIXTURES / "difference.csv"


@pytest.fixture(scope="session")
def residuals_csv() -> Path:
    return FIXTURES / "orbit_residuals.csv"


@pytest.fixture(scope="session")
def snapshot_file() -> Path:
    return FIXTURES / "state.snap"
