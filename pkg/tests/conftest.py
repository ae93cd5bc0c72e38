import json
from pathlib import Path

import numpy as np
import pytest

from anikern.aniso_core import Symbol
from anikern.grid import AnisoGrid
from anikern.operator_vc import CoefficientField, assemble, assemble_reference

UNIT_1D = {((1,), (1,)): 1.0}


@pytest.fixture
def gaussian() -> Symbol:
    """R = xi^2, the heat equation on the line."""
    return Symbol.from_terms([1], {(2,): 1.0})


@pytest.fixture
def mixed() -> Symbol:
    """R = xi_1^2 + xi_2^4, weights m = (1, 2)."""
    return Symbol.from_terms([1, 2], {(2, 0): 1.0, (0, 4): 1.0})


@pytest.fixture
def line_grid() -> AnisoGrid:
    return AnisoGrid(radii=(4.0,), counts=(64,))


@pytest.fixture
def checkerboard_pair(line_grid):
    """(Hd, Ld) for a checkerboard principal coefficient in {0.75, 1.5}."""
    coeffs = CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5)
    return assemble(coeffs), assemble_reference(UNIT_1D, line_grid, [1])


@pytest.fixture
def write_config(tmp_path):
    def write(payload: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return write


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)
