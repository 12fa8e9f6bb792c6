"""Grids, grid functions, interpolation stencils, and serialization."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radonlab.errors import DimensionMismatchError, UnsupportedInputError
from radonlab.grid import (
    Grid,
    GridFunction,
    dump_grid_function,
    grid_function_csv,
    load_grid_function,
    load_grid_function_csv,
)
from radonlab.util import rng_for


def test_grid_basic_geometry():
    g = Grid(2, 4.0, 9)
    assert g.size == 81
    assert g.h == 1.0
    assert g.axis[0] == -4.0 and g.axis[-1] == 4.0
    assert g.cell_volume() == 1.0
    assert g.points().shape == (81, 2)


def test_grid_rejects_coarse_axes():
    with pytest.raises(UnsupportedInputError):
        Grid(1, 4.0, 7)
    with pytest.raises(ValueError):
        Grid(1, 0.0, 16)


def test_same_as():
    assert Grid(2, 4.0, 16).same_as(Grid(2, 4.0, 16))
    assert not Grid(2, 4.0, 16).same_as(Grid(2, 4.0, 32))
    assert not Grid(1, 4.0, 16).same_as(Grid(2, 4.0, 16))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(8, 12), st.data())
def test_flat_multi_index_roundtrip(n, P, data):
    g = Grid(n, 1.0, P)
    flat = data.draw(st.integers(0, g.size - 1))
    multi = g.multi_index(flat)
    assert len(multi) == n
    assert all(0 <= m < P for m in multi)
    assert int(g.flat_index(multi)) == flat


def test_interp_stencil_partition_of_unity():
    g = Grid(2, 4.0, 16)
    rng = rng_for(0, 5)
    targets = rng.uniform(-4.0, 4.0, size=(50, 2))
    idx, w, inside = g.interp_stencil(targets)
    assert idx.shape == (50, 4) and w.shape == (50, 4)
    assert np.all(inside)
    assert np.allclose(w.sum(axis=1), 1.0)


def test_interp_stencil_outside_is_zero_weighted():
    g = Grid(1, 4.0, 16)
    idx, w, inside = g.interp_stencil(np.array([[5.0], [0.0]]))
    assert not inside[0] and inside[1]
    assert np.all(w[0] == 0.0)


def test_interp_exact_on_multilinear():
    # multilinear interpolation reproduces a*x + b*y + c exactly
    g = Grid(2, 2.0, 11)
    f = GridFunction.from_callable(g, lambda p: 3.0 * p[:, 0] - 2.0 * p[:, 1] + 0.5)
    rng = rng_for(0, 6)
    targets = rng.uniform(-2.0, 2.0, size=(40, 2))
    vals, inside = f.sample(targets)
    assert np.all(inside)
    expected = 3.0 * targets[:, 0] - 2.0 * targets[:, 1] + 0.5
    assert np.allclose(vals, expected, atol=1e-12)


def test_interp_matrix_matches_stencil():
    g = Grid(2, 2.0, 9)
    rng = rng_for(0, 7)
    targets = rng.uniform(-2.0, 2.0, size=(30, 2))
    vals = rng.standard_normal(g.size)
    f = GridFunction(g, vals)
    direct, _ = f.sample(targets)
    mat, inside = g.interp_matrix(targets)
    assert np.all(inside)
    assert np.allclose(mat @ vals, direct)


def test_sample_at_grid_points_is_exact():
    g = Grid(2, 4.0, 12)
    rng = rng_for(0, 8)
    f = GridFunction(g, rng.standard_normal(g.size))
    vals, inside = f.sample(g.points())
    assert np.all(inside)
    assert np.allclose(vals, f.values, atol=1e-12)


def test_lp_norms_carry_cell_volume():
    g = Grid(1, 4.0, 9)
    f = GridFunction(g, np.ones(g.size))
    # 9 cells of volume 1: integral of 1 over the sampled measure
    assert abs(f.lp_norm(1) - 9.0) < 1e-12
    assert abs(f.lp_norm(2) - 3.0) < 1e-12
    assert f.lp_norm(np.inf) == 1.0
    g2 = Grid(1, 4.0, 17)  # refining halves h, the l2 norm shrinks by sqrt(2)
    f2 = GridFunction(g2, np.ones(g2.size))
    assert abs(f2.lp_norm(2) - np.sqrt(17.0 * 0.5)) < 1e-12


def test_inner_product_consistency():
    g = Grid(1, 2.0, 16)
    rng = rng_for(0, 9)
    f = GridFunction(g, rng.standard_normal(g.size))
    h = GridFunction(g, rng.standard_normal(g.size))
    assert abs(f.inner(h) - float(np.dot(f.values, h.values)) * g.cell_volume()) < 1e-12
    assert abs(f.inner(f) - f.lp_norm(2) ** 2) < 1e-12


def test_grid_function_algebra():
    g = Grid(1, 2.0, 8)
    f = GridFunction(g, np.arange(8.0))
    h = GridFunction(g, np.ones(8))
    assert np.array_equal((f + h).values, np.arange(8.0) + 1.0)
    assert np.array_equal((f - h).values, np.arange(8.0) - 1.0)
    assert np.array_equal((f * 2.0).values, 2.0 * np.arange(8.0))
    assert np.array_equal((f * h).values, f.values)


def test_grid_function_rejects_bad_values():
    g = Grid(1, 2.0, 8)
    with pytest.raises(DimensionMismatchError):
        GridFunction(g, np.ones(9))
    with pytest.raises(ValueError):
        GridFunction(g, np.array([np.nan] + [0.0] * 7))


def test_reshaped_layout():
    g = Grid(2, 2.0, 8)
    f = GridFunction(g, np.arange(64.0))
    r = f.reshaped()
    assert r.shape == (8, 8)
    # row-major: first axis slowest
    assert r[1, 0] == 8.0


def test_csv_roundtrip():
    g = Grid(2, 3.0, 8)
    rng = rng_for(0, 10)
    f = GridFunction(g, rng.standard_normal(g.size))
    text = grid_function_csv(f, None)
    back = load_grid_function_csv(text, 3.0)
    assert back.grid.same_as(g)
    assert np.array_equal(back.values, f.values)


def test_binary_roundtrip(tmp_path):
    g = Grid(3, 4.0, 8)
    rng = rng_for(0, 12)
    f = GridFunction(g, rng.standard_normal(g.size))
    path = str(tmp_path / "f.bin")
    dump_grid_function(f, path)
    back = load_grid_function(path)
    assert back.grid.same_as(g)
    assert np.array_equal(back.values, f.values)
