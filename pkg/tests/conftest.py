# tests/conftest.py
"""Shared grids, potentials and solved states (session cached)."""

import sys
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from src.discretization.grid import SampledFunction, make_log_radial_grid, make_tensor_grid  # noqa: E402
from src.potentials.catalogue import PotentialSpec, sample  # noqa: E402
from src.potentials.decomposition import Decomposition, decompose  # noqa: E402
from src.zerostate.solver import solve_channel  # noqa: E402

RADIAL_RANGE = (1e-3, 1e3)
RADIAL_COUNT = 600


@dataclass(frozen=True, eq=False)
class Solved:
    spec: PotentialSpec
    V: SampledFunction
    dec: Decomposition
    ev: object
    op: object
    state: object


@lru_cache(maxsize=None)
def solved(kind: str, n: int, channel: int, count: int = RADIAL_COUNT,
           amplitude: float = 1.0) -> Solved:
    grid = make_log_radial_grid(*RADIAL_RANGE, count, n)
    spec = PotentialSpec(kind, n, (amplitude, 1.0))
    V = sample(spec, grid)
    dec = decompose(V)
    ev, op, state = solve_channel(dec, channel)
    return Solved(spec, V, dec, ev, op, state)


@pytest.fixture(scope="session")
def radial_grid3():
    return make_log_radial_grid(*RADIAL_RANGE, RADIAL_COUNT, 3)


@pytest.fixture(scope="session")
def tensor_grid3():
    return make_tensor_grid(0.1, 2.0, 3)


@pytest.fixture(scope="session")
def radial3():
    return solved("inverse_design_radial", 3, 0)


@pytest.fixture(scope="session")
def dipole3():
    return solved("inverse_design_dipole", 3, 1)


@pytest.fixture(scope="session")
def breathing3():
    return solved("inverse_design_dipole", 3, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)
