"""Shared fixtures: one cheap 1-d operator factory reused across files.

The factory covers the translation family on a 64-point line, which is
the smallest setting where every operator-layer code path (windowed
averages, blocks, adjoints) runs in milliseconds. Scenario-specific
setups live next to the tests that need them.
"""

import numpy as np
import pytest

from radonlab.fields import DilationExponents, GammaSpec, WeightedField
from radonlab.grid import Grid, GridFunction
from radonlab.operators import CutoffChain, OperatorFactory
from radonlab.poly import Poly
from radonlab.util import rng_for


def line_translation_gamma():
    return GammaSpec(
        1, 1, lambda t, x: np.array(x, dtype=float, copy=True) + t, label="translation"
    )


def coordinate_field_1d():
    from radonlab.fields import VectorFieldSpec

    return VectorFieldSpec.from_polys([Poly.constant(1, 1.0)], label="d/dx")


@pytest.fixture(scope="session")
def line_grid():
    return Grid(1, 4.0, 64)


@pytest.fixture(scope="session")
def line_factory(line_grid):
    fields = [WeightedField(coordinate_field_1d(), (1,))]
    e = DilationExponents(((1,),))
    return OperatorFactory(
        line_grid,
        CutoffChain(line_grid),
        fields,
        e,
        gamma=line_translation_gamma(),
        a=0.5,
        t_nodes=16,
    )


@pytest.fixture
def line_probe(line_grid):
    rng = rng_for(0, 1)
    pts = line_grid.points()
    vals = np.exp(-np.sum(pts**2, axis=1)) * (1.0 + 0.1 * rng.standard_normal(line_grid.size))
    return GridFunction(line_grid, vals)
