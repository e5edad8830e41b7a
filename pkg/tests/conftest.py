import numpy as np
import pytest

from slipflow.domain import Grid
from slipflow.stokes import solve_eigen

_BASIS_CACHE = {}


@pytest.fixture(scope="session")
def cached_basis():
    """Session-wide eigenbasis cache keyed by (grid, modes, sector)."""

    def get(grid: Grid, modes: int, sector: str = "slip"):
        key = (grid, modes, sector)
        if key not in _BASIS_CACHE:
            _BASIS_CACHE[key] = solve_eigen(
                grid, modes, sector=sector, recover_pressures=False
            )
        return _BASIS_CACHE[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
