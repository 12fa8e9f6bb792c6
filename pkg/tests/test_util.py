"""Seeding, compensated sums, quadrature, and CSV formatting."""

import math
import os

import numpy as np
import pytest

from radonlab.util import (
    format_float,
    gauss_legendre,
    kahan_sum,
    parallel_map,
    rng_for,
    sobol_points,
    tensor_quadrature,
    write_csv,
)


def test_rng_for_is_deterministic_and_indexed():
    a = rng_for(42, 3).standard_normal(5)
    b = rng_for(42, 3).standard_normal(5)
    c = rng_for(42, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_kahan_sum_matches_fsum():
    rng = rng_for(0, 11)
    vals = rng.standard_normal(100000) * 1e8
    exact = math.fsum(vals.tolist())
    assert abs(kahan_sum(vals) - exact) <= 1e-6 * abs(exact)


def test_kahan_sum_axis():
    vals = np.arange(12.0).reshape(3, 4)
    assert np.allclose(kahan_sum(vals, axis=0), vals.sum(axis=0))
    assert np.allclose(kahan_sum(vals, axis=1), vals.sum(axis=1))


def test_gauss_legendre_exactness():
    # k nodes integrate polynomials up to degree 2k-1 exactly
    for k in (2, 5, 8):
        x, w = gauss_legendre(k, -1.0, 1.0)
        for deg in range(2 * k):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert abs(np.dot(w, x**deg) - exact) < 1e-13
    x, w = gauss_legendre(4, 1.0, 3.0)
    assert abs(np.dot(w, x) - 4.0) < 1e-13  # integral of x over [1, 3]


def test_tensor_quadrature_mass_and_shape():
    nodes, w = tensor_quadrature(5, [1.0, 2.0])
    assert nodes.shape == (25, 2)
    assert w.shape == (25,)
    assert abs(w.sum() - 2.0 * 4.0) < 1e-12
    # separable integrand integrates to the product of axis integrals
    vals = nodes[:, 0] ** 2 * nodes[:, 1] ** 2
    assert abs(np.dot(w, vals) - (2.0 / 3.0) * (16.0 / 3.0)) < 1e-12


def test_tensor_quadrature_per_axis_counts():
    nodes, w = tensor_quadrature([3, 7], [1.0, 1.0])
    assert nodes.shape == (21, 2)
    assert abs(w.sum() - 4.0) < 1e-12


def test_sobol_points_bounds_and_determinism():
    pts = sobol_points(32, 3, 2.5, seed=9)
    assert pts.shape == (32, 3)
    assert np.all(np.abs(pts) <= 2.5)
    again = sobol_points(32, 3, 2.5, seed=9)
    assert np.array_equal(pts, again)
    other = sobol_points(32, 3, 2.5, seed=10)
    assert not np.array_equal(pts, other)


def test_format_float_roundtrips():
    for x in (0.1, -math.pi, 1e-300, 3.0, 2.0 / 3.0):
        assert float(format_float(x)) == x
    assert format_float(float("nan")) == "nan"


def test_write_csv_string_and_file(tmp_path):
    text = write_csv(None, ["a", "b"], [[1, 0.1], [2, 2.0 / 3.0]])
    lines = text.split("\n")
    assert lines[0] == "a,b"
    assert float(lines[1].split(",")[1]) == 0.1
    assert "\r" not in text
    path = os.path.join(tmp_path, "out.csv")
    write_csv(path, ["a"], [[1.5]])
    with open(path, encoding="utf-8") as fh:
        assert fh.read() == "a\n1.5\n"


def test_parallel_map_preserves_order():
    items = list(range(20))
    serial = parallel_map(lambda x: x * x, items, jobs=1)
    threaded = parallel_map(lambda x: x * x, items, jobs=4)
    assert serial == threaded == [x * x for x in items]


def test_parallel_map_empty():
    assert parallel_map(lambda x: x, [], jobs=4) == []
