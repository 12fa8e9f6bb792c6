"""The first Heisenberg group as a worked three-field example.

Coordinates (x, y, t) with left-invariant frame X = d/dx - 2y d/dt,
Y = d/dy + 2x d/dt, T = d/dt, so [X, Y] = 4T and both fields commute
with T. The flow of a constant combination a X + b Y + c T has a
closed form because the t-velocity is constant along it, which makes
the exponential map exact and cheap. On top of that sit the group
dilations, a strong maximal function over a three-scale grid, its
dilation covariance identity, and a one-dimensional cautionary
family gamma_{s,t}(x) = x - s t.
"""

import numpy as np

from .errors import CoverageError, UnsupportedInputError
from .estimates import l2_opnorm, probe_function
from .fields import DilationExponents, GammaSpec, VectorFieldSpec, WeightedField
from .grid import GridFunction
from .kernels import make_product_kernel, tensor_bump
from .operators import CutoffChain, OperatorFactory
from .poly import Poly
from .util import rng_for, tensor_quadrature

HOMOGENEOUS_DIM = 4
DEFAULT_BALL_NODES = 12


def heis_fields(strong=True):
    """The left-invariant frame as weighted fields.

    strong=True gives each field its own parameter slot (degrees are
    the three unit vectors); strong=False uses two parameters with T
    carrying the mixed degree (1, 1) inherited from [X, Y] = 4T.
    """

    def coords(*vals):
        out = []
        for v in vals:
            if isinstance(v, Poly):
                out.append(v)
            else:
                out.append(Poly.constant(3, float(v)))
        return out

    x = Poly.variable(3, 0)
    y = Poly.variable(3, 1)
    X = VectorFieldSpec.from_polys(coords(1.0, 0.0, y * -2.0), label="X")
    Y = VectorFieldSpec.from_polys(coords(0.0, 1.0, x * 2.0), label="Y")
    T = VectorFieldSpec.from_polys(coords(0.0, 0.0, 1.0), label="T")
    if strong:
        degrees = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    else:
        degrees = ((1, 0), (0, 1), (1, 1))
    return tuple(WeightedField(f, d) for f, d in zip((X, Y, T), degrees))


def heis_dilate(r, p):
    """Anisotropic dilation (x, y, t) -> (rx, ry, r^2 t)."""
    if r <= 0:
        raise UnsupportedInputError("dilation parameter must be positive")
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., 0] *= r
    out[..., 1] *= r
    out[..., 2] *= r * r
    return out


def heis_flow(coeffs, points):
    """Time-one flow of a X + b Y + c T, exact.

    The t-velocity c + 2(b x(s) - a y(s)) is constant in s because x
    and y move linearly with the same slopes, so the endpoint is
    (x + a, y + b, t + c + 2(b x - a y)).
    """
    a, b, c = (float(v) for v in coeffs)
    points = np.asarray(points, dtype=float)
    out = points.copy()
    out[..., 0] += a
    out[..., 1] += b
    out[..., 2] += c + 2.0 * (b * points[..., 0] - a * points[..., 1])
    return out


def heis_gamma(rho=2.0):
    """gamma_t = exp(t1 X + t2 Y + t3 T) as a parametrized family."""
    return GammaSpec(3, 3, lambda t, x: heis_flow(t, x), rho=rho, label="heis")


def heis_exponents(strong=True):
    if strong:
        return DilationExponents(((1, 0, 0), (0, 1, 0), (0, 0, 1)))
    return DilationExponents(((1, 0), (0, 1), (1, 1)))


def covariant_delta_grid(ncap, kmax=1):
    """Scale triples (N 2^-k1, N 2^-k2, N^2 2^-k3).

    The quadratic cap on the third slot makes the set map onto the
    corresponding set for cap N/r under delta -> (d1/r, d2/r, d3/r^2),
    which is what the covariance identity needs discretely.
    """
    ncap = float(ncap)
    out = []
    for k1 in range(kmax + 1):
        for k2 in range(kmax + 1):
            for k3 in range(kmax + 1):
                out.append((ncap * 2.0**-k1, ncap * 2.0**-k2, ncap**2 * 2.0**-k3))
    return out


def _ball_nodes(npoints):
    nodes, w = tensor_quadrature(npoints, [1.0, 1.0, 1.0])
    mask = np.linalg.norm(nodes, axis=1) <= 1.0
    return nodes[mask], w[mask]


def strong_maximal(f, ncap, delta_grid, nodes_per_axis=DEFAULT_BALL_NODES, strict=False):
    """Sup over the scale grid of flow averages of |f| over the unit ball.

    For each delta the average runs over parameters (u1, u2, u3) in the
    euclidean unit ball, moving the base point by the flow of
    u1 d1 X + u2 d2 Y + u3 d3 T. Samples landing outside the grid box
    read f as zero; strict=True raises instead, for callers who cannot
    justify zero extension.
    """
    delta_grid = [tuple(float(c) for c in d) for d in delta_grid]
    caps = (ncap, ncap, max(ncap, ncap**2))
    for d in delta_grid:
        if len(d) != 3 or any(not 0.0 < c <= cap for c, cap in zip(d, caps)):
            raise UnsupportedInputError("scale triples must respect the (N, N, N^2) cap")
    grid = f.grid
    nodes, w = _ball_nodes(nodes_per_axis)
    pts = grid.points()
    absf = GridFunction(grid, np.abs(f.values))
    best = np.zeros(grid.size)
    for d in delta_grid:
        acc = np.zeros(grid.size)
        for i in range(nodes.shape[0]):
            coeffs = (d[0] * nodes[i, 0], d[1] * nodes[i, 1], d[2] * nodes[i, 2])
            targets = heis_flow(coeffs, pts)
            vals, inside = absf.sample(targets)
            if strict and not np.all(inside):
                bad = int(np.argmin(inside))
                raise CoverageError(
                    "flow sample left the grid box", point=targets[bad], where="strong_maximal"
                )
            acc += w[i] * vals
        np.maximum(best, acc, out=best)
    return GridFunction(grid, best)


def interior_mask(grid, ncap):
    """Points whose every flow sample stays inside the box.

    Worst-case moves: ncap in x and y, and ncap^2 + 2 ncap (|x| + |y|)
    in t, bounded using the box half-width.
    """
    pts = grid.points()
    margin_xy = ncap
    margin_t = ncap**2 + 2.0 * ncap * (np.abs(pts[:, 0]) + np.abs(pts[:, 1]))
    ok = (np.abs(pts[:, 0]) <= grid.L - margin_xy) & (np.abs(pts[:, 1]) <= grid.L - margin_xy)
    return ok & (np.abs(pts[:, 2]) <= grid.L - margin_t)


def dilate_function(f, r, p, target_grid):
    """The L^p-invariant dilate r^{4/p} f(r . xi) resampled on a new grid."""
    pts = heis_dilate(r, target_grid.points())
    vals, _ = f.sample(pts)
    return GridFunction(target_grid, r ** (HOMOGENEOUS_DIM / p) * vals)


def lipschitz_quotient(gf, lag, bound, per_axis=9):
    """Steepest difference quotient at offset lag along any axis.

    Probes a fixed coarse lattice inside [-bound, bound]^n through the
    grid interpolant, so the estimate depends only on physical scales
    and stays stable under grid refinement. Quotients taken between
    neighbouring grid points would sharpen as kinks get resolved and
    drift with resolution.
    """
    axes = [np.linspace(-bound, bound, per_axis)] * gf.grid.n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    base, _ = gf.sample(pts)
    worst = 0.0
    for axis_i in range(gf.grid.n):
        shifted = pts.copy()
        shifted[:, axis_i] += lag
        vals, _ = gf.sample(shifted)
        worst = max(worst, float(np.max(np.abs(vals - base))) / lag)
    return worst


def dilation_covariance_check(
    f, r, p, ncap, grid_pair, kmax=1, nodes_per_axis=DEFAULT_BALL_NODES, window=0.5
):
    """L^inf mismatch of the rescaled maximal identity on an interior window.

    Computes the maximal function of f at cap N on the first grid, and
    the maximal function of the dilate at cap N/r on the second grid
    read back through the inverse dilation. The two agree in the
    continuum, so the mismatch is pure resampling error. Returns
    (discrepancy, budget): the budget is the first-order interpolation
    bound, one grid step times the steepest measured slope per side,
    so it scales linearly with resolution by construction and must
    dominate the discrepancy.
    """
    grid, grid_r = grid_pair
    if grid.n != 3 or grid_r.n != 3:
        raise UnsupportedInputError("covariance check needs 3-d grids")
    if grid_r.L * r < grid.L * (1 - 1e-12) or grid_r.h > grid.h / r * (1 + 1e-12):
        raise UnsupportedInputError("second grid does not resolve the dilate")
    side_a = strong_maximal(f, ncap, covariant_delta_grid(ncap, kmax), nodes_per_axis)
    f_r = dilate_function(f, r, p, grid_r)
    cap_r = ncap / r
    side_b = strong_maximal(f_r, cap_r, covariant_delta_grid(cap_r, kmax), nodes_per_axis)
    back_pts = heis_dilate(1.0 / r, grid.points())
    back_vals, _ = side_b.sample(back_pts)
    back = r ** (-HOMOGENEOUS_DIM / p) * back_vals
    mask = interior_mask(grid, ncap)
    mask &= np.max(np.abs(grid.points()), axis=1) <= window * grid.L
    if not np.any(mask):
        raise UnsupportedInputError("interior window is empty at this cap")
    discrepancy = float(np.max(np.abs(back[mask] - side_a.values[mask])))
    budget = grid.h * lipschitz_quotient(side_a, ncap, window * grid.L)
    budget += grid_r.h * r ** (-HOMOGENEOUS_DIM / p) * lipschitz_quotient(
        side_b, cap_r, window * grid_r.L
    )
    return discrepancy, budget


# -- the x - st cautionary family -------------------------------------------


def xst_gamma(rho=2.0):
    """gamma_{s,t}(x) = x - s t on the line, two parameters."""

    def evaluator(t, x):
        return x - t[0] * t[1]

    return GammaSpec(2, 1, evaluator, rho=rho, label="x-st")


def xst_factory(grid, a=0.25, t_nodes=24):
    """Operator factory for the x - st family on a 1-d grid."""
    field = VectorFieldSpec.from_polys([Poly.constant(1, -1.0)], label="-d/dx")
    wf = WeightedField(field, (1, 1))
    e = DilationExponents(((1, 0), (0, 1)))
    return OperatorFactory(
        grid,
        CutoffChain(grid),
        [wf],
        e,
        gamma=xst_gamma(),
        a=a,
        t_nodes=t_nodes,
    )


def xst_experiment(grid, J_values, p=2, a=0.25, trials=12, seed=0, t_nodes=24):
    """Norm trends for the x - st family: maximal vs singular integral.

    For each J, measures the worst probe ratio of the maximal function
    over the dyadic scale grid of depth J, and a power-iteration norm
    of the odd x odd product singular integral truncated at J. The
    maximal ratios should stay flat in J; the integral series is
    reported as data with no threshold.
    """
    factory = xst_factory(grid, a=a, t_nodes=t_nodes)
    odd = tensor_bump(["odd4"], [a])
    rows = []
    for J in J_values:
        deltas = [(2.0**-k1, 2.0**-k2) for k1 in range(J + 1) for k2 in range(J + 1)]
        worst = 0.0
        for tr in range(trials):
            rng = rng_for(seed, 40 + tr)
            probe = GridFunction(grid, probe_function(grid, rng))
            denom = probe.lp_norm(p)
            if denom <= 1e-300:
                continue
            out = factory.maximal(probe, deltas)
            worst = max(worst, out.lp_norm(p) / denom)
        kernel = make_product_kernel([lambda k: odd, lambda k: odd], (1, 1), J, a)
        tnorm = l2_opnorm(factory.T_full(kernel), tol=1e-4, seed=seed, label="T[J=%d]" % J)
        rows.append(
            {
                "J": int(J),
                "maximal_ratio": worst,
                "tnorm": tnorm.value,
                "tnorm_iters": tnorm.iters,
            }
        )
    slope = maximal_slope(rows)
    return {"rows": rows, "maximal_slope": slope, "p": p, "seed": seed}


def maximal_slope(rows):
    """Least-squares slope of log2 maximal ratio against J."""
    js = np.array([row["J"] for row in rows], dtype=float)
    vals = np.array([max(row["maximal_ratio"], 1e-300) for row in rows])
    if js.size < 2:
        return 0.0
    y = np.log2(vals)
    A = np.stack([js, np.ones_like(js)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def homogeneous_ball_predicate(scale=1.0):
    """Membership test for the dilation-invariant ball |z|^2-type gauge.

    Gauge rho(x, y, t) = ((x^2 + y^2)^2 + t^2)^{1/4}; balls are the
    sets rho(p - center offset in group terms) < scale. The group
    difference uses the left translation inverse.
    """

    def predicate(center, points):
        cx, cy, ct = (float(c) for c in center)
        dx = points[:, 0] - cx
        dy = points[:, 1] - cy
        dt = points[:, 2] - ct - 2.0 * (cx * points[:, 1] - cy * points[:, 0])
        gauge = ((dx**2 + dy**2) ** 2 + dt**2) ** 0.25
        return gauge < scale

    return predicate


def covariance_report(f, p, ncap, grid_pair, r_values=(1.0, 2.0), kmax=1, nodes_per_axis=8):
    """Rows of (r, discrepancy, budget) for the covariance identity."""
    rows = []
    for r in r_values:
        d, budget = dilation_covariance_check(f, r, p, ncap, grid_pair, kmax, nodes_per_axis)
        rows.append(
            {
                "r": float(r),
                "p": float(p),
                "ncap": float(ncap),
                "discrepancy": d,
                "budget": budget,
            }
        )
    return rows
