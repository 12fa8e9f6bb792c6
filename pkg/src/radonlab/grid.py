"""Uniform grids, grid functions, and multilinear interpolation stencils.

The discretized function space is a tensor grid on the box [-L, L]^n
with P points per axis. Grid functions store a flat value vector in
row-major order (first axis slowest); L^p norms carry the cell volume
h^n. Interpolation at off-grid points is multilinear and exposed as an
explicit sparse stencil so operators built from it have exact
transposes.
"""

import struct

import numpy as np
from scipy import sparse

from .errors import DimensionMismatchError, UnsupportedInputError
from .util import write_csv

BOX_TOL = 1e-12


class Grid:
    """Isotropic tensor grid: n axes of P points on [-L, L]."""

    def __init__(self, dimension, half_width, points_per_axis):
        if points_per_axis < 8:
            raise UnsupportedInputError("need at least 8 points per axis")
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.n = int(dimension)
        self.L = float(half_width)
        self.P = int(points_per_axis)
        self.h = 2.0 * self.L / (self.P - 1)
        self.axis = np.linspace(-self.L, self.L, self.P)
        self._points = None

    @property
    def size(self):
        return self.P**self.n

    def points(self):
        if self._points is None:
            mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
            self._points = np.stack([m.ravel() for m in mesh], axis=-1)
        return self._points

    def cell_volume(self):
        return self.h**self.n

    def same_as(self, other):
        return self.n == other.n and self.P == other.P and abs(self.L - other.L) < 1e-14

    def flat_index(self, multi):
        multi = np.asarray(multi, dtype=np.int64)
        strides = self.P ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return multi @ strides

    def multi_index(self, flat):
        out = []
        for k in range(self.n - 1, -1, -1):
            out.append(flat % self.P)
            flat //= self.P
        return tuple(reversed(out))

    def interp_stencil(self, targets):
        """Multilinear interpolation as index/weight arrays.

        Returns (indices (B, 2^n), weights (B, 2^n), inside (B,)).
        Rows with inside=False get zero weights: evaluating there reads
        as 0 and the caller decides whether that is a coverage fault.
        """
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if targets.shape[1] != self.n:
            raise DimensionMismatchError("targets have %d coordinates, grid has %d" % (targets.shape[1], self.n))
        B = targets.shape[0]
        tol = BOX_TOL * max(1.0, self.L)
        inside = np.all(np.abs(targets) <= self.L + tol, axis=1)
        rel = np.clip((targets + self.L) / self.h, 0.0, self.P - 1.0)
        base = np.minimum(rel.astype(np.int64), self.P - 2)
        frac = rel - base
        corners = 1 << self.n
        indices = np.zeros((B, corners), dtype=np.int64)
        weights = np.ones((B, corners))
        strides = self.P ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        for c in range(corners):
            idx = np.zeros(B, dtype=np.int64)
            for k in range(self.n):
                hi = (c >> (self.n - 1 - k)) & 1
                idx += (base[:, k] + hi) * strides[k]
                weights[:, c] *= frac[:, k] if hi else 1.0 - frac[:, k]
            indices[:, c] = idx
        weights[~inside] = 0.0
        indices[~inside] = 0
        return indices, weights, inside

    def interp_matrix(self, targets):
        """The stencil as a sparse (B, P^n) matrix plus the inside mask."""
        indices, weights, inside = self.interp_stencil(targets)
        B, corners = indices.shape
        rows = np.repeat(np.arange(B), corners)
        mat = sparse.csr_matrix(
            (weights.ravel(), (rows, indices.ravel())), shape=(B, self.size)
        )
        return mat, inside


class GridFunction:
    """Values on a grid, flat row-major; immutable by convention."""

    def __init__(self, grid, values):
        self.grid = grid
        values = np.asarray(values, dtype=float).ravel()
        if values.size != grid.size:
            raise DimensionMismatchError("value count %d, grid has %d points" % (values.size, grid.size))
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.values = values

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, np.asarray(fn(grid.points()), dtype=float))

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.size))

    def reshaped(self):
        return self.values.reshape((self.grid.P,) * self.grid.n)

    def lp_norm(self, p):
        if p == np.inf or p == "inf":
            return float(np.max(np.abs(self.values)))
        p = float(p)
        if p < 1:
            raise ValueError("p must be >= 1")
        return float((self.grid.cell_volume() * np.sum(np.abs(self.values) ** p)) ** (1.0 / p))

    def inner(self, other):
        return float(self.grid.cell_volume() * np.dot(self.values, other.values))

    def sample(self, points):
        """Multilinear interpolation; outside-box points read 0."""
        indices, weights, inside = self.grid.interp_stencil(points)
        return np.sum(self.values[indices] * weights, axis=1), inside

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, factor):
        if isinstance(factor, GridFunction):
            return GridFunction(self.grid, self.values * factor.values)
        return GridFunction(self.grid, self.values * float(factor))

    __rmul__ = __mul__


def grid_function_csv(gf, path=None):
    """CSV dump: one row per grid point, index tuple then value."""
    header = ["i%d" % (k + 1) for k in range(gf.grid.n)] + ["value"]
    rows = []
    for flat in range(gf.grid.size):
        rows.append(list(gf.grid.multi_index(flat)) + [gf.values[flat]])
    return write_csv(path, header, rows)


def load_grid_function_csv(text, half_width):
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    n = len(header) - 1
    entries = [ln.split(",") for ln in lines[1:]]
    P = max(int(e[0]) for e in entries) + 1
    grid = Grid(n, half_width, P)
    values = np.zeros(grid.size)
    for e in entries:
        flat = grid.flat_index([int(v) for v in e[:n]])
        values[flat] = float(e[n])
    return GridFunction(grid, values)


def dump_grid_function(gf, path):
    """Binary dump: n, P as little-endian int64, L as little-endian
    float64, then the raw row-major float64 values."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", gf.grid.n))
        fh.write(struct.pack("<q", gf.grid.P))
        fh.write(struct.pack("<d", gf.grid.L))
        fh.write(np.ascontiguousarray(gf.values, dtype="<f8").tobytes())


def load_grid_function(path):
    with open(path, "rb") as fh:
        n = struct.unpack("<q", fh.read(8))[0]
        P = struct.unpack("<q", fh.read(8))[0]
        L = struct.unpack("<d", fh.read(8))[0]
        grid = Grid(n, L, P)
        values = np.frombuffer(fh.read(8 * grid.size), dtype="<f8")
    return GridFunction(grid, values.copy())
