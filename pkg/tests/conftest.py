import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pseudoparabolic import constants as cs  # noqa: E402
from pseudoparabolic import fields as fl  # noqa: E402
from pseudoparabolic import operators as op  # noqa: E402


@pytest.fixture(scope="session")
def grushin16():
    grid = op.Grid.box((-1, 1, -1, 1), (16, 16))
    return op.assemble(grid, fl.grushin(), 3.0)


@pytest.fixture(scope="session")
def grushin16_constants(grushin16):
    return cs.compute_problem_constants(grushin16, probes=20)


@pytest.fixture(scope="session")
def grushin8():
    grid = op.Grid.box((-1, 1, -1, 1), (8, 8))
    return op.assemble(grid, fl.grushin(), 3.0)


@pytest.fixture(scope="session")
def tiny_grushin():
    grid = op.Grid.box((-1, 1, -1, 1), (3, 3))
    return op.assemble(grid, fl.grushin(), 3.0)
