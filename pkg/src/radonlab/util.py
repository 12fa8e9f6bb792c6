"""Small shared utilities: seeding, compensated sums, quadrature, CSV.

Determinism contract: every random draw in the package flows through
`rng_for`, so that sample i of a loop uses seed base_seed XOR i and
parallel/serial runs agree bit for bit.
"""

import csv
import io

import numpy as np
from numpy.polynomial.legendre import leggauss

#: floats in emitted CSV carry 17 significant digits (round-trip exact)
FLOAT_FMT = "%.17g"


def rng_for(base_seed, index=0):
    """Generator for sample `index` of an experiment seeded by `base_seed`."""
    return np.random.default_rng((int(base_seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF)


def kahan_sum(values, axis=None):
    """Compensated sum; order-insensitive to ~1e-16 relative.

    Used where a reduction must agree between serial and chunked
    evaluation orders.
    """
    values = np.asarray(values, dtype=float)
    if axis is None:
        values = values.ravel()
        axis = 0
    total = np.zeros(np.delete(values.shape, axis))
    comp = np.zeros_like(total)
    for chunk in np.moveaxis(values, axis, 0):
        y = chunk - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total if total.shape else float(total)


def gauss_legendre(npoints, lo, hi):
    """1-D Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = leggauss(npoints)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * x, half * w


def tensor_quadrature(npoints, radii):
    """Tensor-product Gauss-Legendre rule on the box prod [-r_k, r_k].

    Returns nodes of shape (npoints**dim, dim) and matching weights.
    `npoints` may be an int (same per axis) or a sequence.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    dim = radii.size
    if np.isscalar(npoints) or np.ndim(npoints) == 0:
        npoints = [int(npoints)] * dim
    axes = [gauss_legendre(n, -r, r) for n, r in zip(npoints, radii)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.ones(nodes.shape[0])
    for wg in wgrids:
        weights = weights * wg.ravel()
    return nodes, weights


def sobol_points(count, dim, box_halfwidth=1.0, seed=7):
    """Deterministic quasi-random points in the centered box, shape (count, dim)."""
    from scipy.stats import qmc

    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sampler.random(count)
    return (2.0 * u - 1.0) * np.asarray(box_halfwidth, dtype=float)


def format_float(x):
    x = float(x)
    if np.isnan(x):
        return "nan"
    return FLOAT_FMT % x


def write_csv(path, header, rows):
    """Write CSV with LF endings, UTF-8, floats at 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
        )
    data = buf.getvalue()
    if path is None:
        return data
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    return data


def parallel_map(fn, items, jobs=1):
    """Map preserving order; thread pool when jobs > 1.

    Results are collected by index so the outcome does not depend on
    completion order.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
