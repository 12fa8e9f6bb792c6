"""Flows, exponential charts, and reachable-set volume estimates.

Everything here drives a list of weighted fields (fields.py) through a
fixed-step RK4 integrator: exponential maps e^{u . Z} x0, piecewise
constant control trajectories, and the occupancy estimator for the
volume of the time-one reachable set under controls in the unit l2
ball (the anisotropic ball of the induced geometry).

Volume estimation: endpoints are binned on a lattice scaled to their
bounding box, occupied cells are counted with weight 1, occupied cells
touching an empty neighbor with weight 1/2. The half weight cancels
the first-order boundary-band bias of plain hit counting. Doubling
runs reuse the control seed, so for fields homogeneous under a
power-of-two dilation the cell pattern repeats exactly and the volume
ratio is exact.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from .errors import DegeneratePointError, DimensionMismatchError
from .fields import VectorFieldSpec, check_shared_dimension, scale_fields
from .util import rng_for, write_csv

RANK_TOL = 1e-10
DEFAULT_PIECE_COUNTS = (1, 2, 4, 8, 16, 32, 64)


class FlowConfig:
    """Fixed-step RK4 settings. total_steps covers the whole unit time."""

    def __init__(self, total_steps=32):
        if total_steps < 1:
            raise ValueError("total_steps must be positive")
        self.total_steps = int(total_steps)

    def steps_for_piece(self, npieces):
        return max(1, -(-self.total_steps // npieces))


def rk4(field_eval, x0, time=1.0, nsteps=32):
    """Integrate dx/ds = V(x) from 0 to `time`, batched over x0."""
    x = np.asarray(x0, dtype=float).copy()
    h = time / nsteps
    for _ in range(nsteps):
        k1 = field_eval(x)
        k2 = field_eval(x + 0.5 * h * k1)
        k3 = field_eval(x + 0.5 * h * k2)
        k4 = field_eval(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _combo_eval(specs, coeffs):
    """V(x) = sum_k c_k X_k(x) with per-sample coefficient rows."""

    def evaluator(x):
        out = np.zeros_like(x)
        for k, spec in enumerate(specs):
            out += coeffs[..., k : k + 1] * spec(x)
        return out

    return evaluator


def flow_combo(specs, coeffs, x0, time=1.0, config=None):
    """e^{time * sum_k c_k X_k} x0; coeffs (..., q) broadcast against x0 (..., n)."""
    config = config or FlowConfig()
    coeffs = np.asarray(coeffs, dtype=float)
    return rk4(_combo_eval(specs, coeffs), x0, time, config.total_steps)


def flow_piecewise(specs, pieces, x0, config=None):
    """Concatenate the flows of m constant control pieces, each of duration 1/m.

    pieces: (B, m, q) control rows; x0: single point or (B, n) batch.
    """
    config = config or FlowConfig()
    pieces = np.asarray(pieces, dtype=float)
    B, m, q = pieces.shape
    if len(specs) != q:
        raise DimensionMismatchError("control width %d, field count %d" % (q, len(specs)))
    n = check_shared_dimension(specs)
    x = np.asarray(x0, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (B, n)).copy()
    nsteps = config.steps_for_piece(m)
    for p in range(m):
        x = rk4(_combo_eval(specs, pieces[:, p, :]), x, 1.0 / m, nsteps)
    return x


# -- frame selection and charts ----------------------------------------------


def select_frame(fields, delta, x0, rank_tol=RANK_TOL):
    """Pick a maximal-volume subset of the scaled fields at x0.

    Returns (indices, rank, singular_values). rank counts singular
    values of the scaled field matrix above rank_tol (absolute; the
    caller picks delta large enough for this to be meaningful). The
    subset maximizes the Gram volume sqrt(det(B^T B)) among all subsets
    of that size, smallest index tuple on ties.
    """
    x0 = np.asarray(x0, dtype=float)
    scaled = scale_fields(delta, fields)
    M = np.stack([s(x0) for s in scaled], axis=-1)  # (n, q)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > rank_tol))
    if rank == 0:
        raise DegeneratePointError("all scaled fields vanish at the base point")
    best = None
    best_vol = -1.0
    for subset in itertools.combinations(range(M.shape[1]), rank):
        B = M[:, subset]
        vol = math.sqrt(max(0.0, float(np.linalg.det(B.T @ B))))
        if vol > best_vol * (1.0 + 1e-12):
            best, best_vol = subset, vol
    return best, rank, sv


def frame_gram_volume(fields, delta, x0, indices):
    scaled = scale_fields(delta, fields)
    B = np.stack([scaled[k](np.asarray(x0, dtype=float)) for k in indices], axis=-1)
    return math.sqrt(max(0.0, float(np.linalg.det(B.T @ B))))


class ExpChart:
    """u -> e^{u_1 Z_1 + ... + u_r Z_r} x0 for a chosen scaled frame."""

    def __init__(self, fields, delta, x0, indices=None, config=None):
        self.x0 = np.asarray(x0, dtype=float)
        self.delta = delta
        self.config = config or FlowConfig()
        if indices is None:
            indices, _, _ = select_frame(fields, delta, self.x0)
        self.indices = tuple(indices)
        scaled = scale_fields(delta, fields)
        self.frame = [scaled[k] for k in self.indices]
        self.degrees = [fields[k].degree for k in self.indices]

    @property
    def rank(self):
        return len(self.frame)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        squeeze = u.ndim == 1
        ub = u[None, :] if squeeze else u.reshape(-1, self.rank)
        out = flow_piecewise(self.frame, ub[:, None, :], self.x0, self.config)
        return out[0] if squeeze else out.reshape(u.shape[:-1] + (out.shape[-1],))

    def jacobian(self, u, step=1e-5):
        """dPhi/du at u by central differences, shape (..., n, rank)."""
        u = np.asarray(u, dtype=float)
        cols = []
        for k in range(self.rank):
            ek = np.zeros(self.rank)
            ek[k] = step
            cols.append((self(u + ek) - self(u - ek)) / (2 * step))
        return np.stack(cols, axis=-1)

    def jacobian_det_ratio(self, ugrid, step=1e-5):
        """|det dPhi(u)| / |det dPhi(0)| over a grid; requires rank == n."""
        J0 = self.jacobian(np.zeros(self.rank), step)
        d0 = abs(float(np.linalg.det(J0)))
        if d0 == 0.0:
            raise DegeneratePointError("chart Jacobian singular at u = 0")
        J = self.jacobian(np.asarray(ugrid, dtype=float), step)
        return np.abs(np.linalg.det(J)) / d0


def pullback_fields(chart, specs, step=1e-5):
    """Express ambient fields in chart coordinates: (dPhi)^+ X(Phi(u))."""

    def make(spec):
        def evaluator(u):
            u = np.asarray(u, dtype=float)
            J = chart.jacobian(u, step)
            vals = spec(chart(u))
            return np.linalg.pinv(J) @ vals[..., None]

        def flat(u):
            return evaluator(u)[..., 0]

        return VectorFieldSpec(chart.rank, flat, label="pullback:%s" % spec.label)

    return [make(s) for s in specs]


# -- reachable-set volume ----------------------------------------------------


class BallEstimate:
    def __init__(self, delta, volume, stderr, det_prediction, samples, seed):
        self.delta = tuple(float(d) for d in np.atleast_1d(delta))
        self.volume = float(volume)
        self.stderr = float(stderr)
        self.det_prediction = float(det_prediction)
        self.samples = int(samples)
        self.seed = int(seed)

    @property
    def ratio(self):
        return self.volume / self.det_prediction if self.det_prediction > 0 else float("inf")

    def __repr__(self):
        return "BallEstimate(delta=%s, volume=%.6g, stderr=%.2g)" % (
            self.delta,
            self.volume,
            self.stderr,
        )


def ball_estimates_csv(estimates, path=None):
    nu = len(estimates[0].delta)
    header = ["delta_%d" % (mu + 1) for mu in range(nu)]
    header += ["volume", "stderr", "det_prediction", "ratio", "samples", "seed"]
    rows = []
    for est in estimates:
        if len(est.delta) != nu:
            raise DimensionMismatchError("estimates mix parameter arities")
        rows.append(
            list(est.delta)
            + [est.volume, est.stderr, est.det_prediction, est.ratio, est.samples, est.seed]
        )
    return write_csv(path, header, rows)


def sample_endpoints(fields, delta, x0, samples, seed, config=None, piece_counts=DEFAULT_PIECE_COUNTS):
    """Endpoints of `samples` random control trajectories.

    Controls are piecewise constant; the piece count cycles through
    piece_counts with an equal share each, and each piece is an
    independent uniform draw from the unit l2 ball of R^q. Mixing piece
    counts keeps some mass near the reachable boundary (a single piece
    is an extreme trajectory) while many pieces probe the interior.
    """
    scaled = scale_fields(delta, fields)
    q = len(scaled)
    share = samples // len(piece_counts)
    leftover = samples - share * len(piece_counts)
    out = []
    for slot, m in enumerate(piece_counts):
        count = share + (leftover if slot == 0 else 0)
        if count == 0:
            continue
        rng = rng_for(seed, m)
        g = rng.standard_normal((count, m, q))
        g /= np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-300)
        radius = rng.random((count, m, 1)) ** (1.0 / q)
        out.append(flow_piecewise(scaled, g * radius, x0, config))
    return np.concatenate(out, axis=0)


def occupancy_volume(points, nbins):
    """Boundary-corrected occupancy volume of a point cloud.

    Cells on a lattice over the bounding box count 1 if occupied and
    surrounded by occupied axis neighbors, 1/2 if occupied next to an
    empty cell or the box edge.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    widths = hi - lo
    if np.any(widths <= 0):
        return 0.0
    h = widths / nbins
    idx = np.clip(((points - lo) / h).astype(np.int64), 0, nbins - 1)
    strides = nbins ** np.arange(n - 1, -1, -1, dtype=np.int64)
    linear = idx @ strides
    occupied = np.unique(linear)
    occ_set = set(occupied.tolist())
    cellvol = float(np.prod(h))
    total = 0.0
    for cell in occupied.tolist():
        coords = [(cell // int(s)) % nbins for s in strides]
        interior = True
        for axis_i, s in enumerate(strides):
            c = coords[axis_i]
            if c == 0 or c == nbins - 1:
                interior = False
                break
            if (cell - int(s)) not in occ_set or (cell + int(s)) not in occ_set:
                interior = False
                break
        total += cellvol if interior else 0.5 * cellvol
    return total


def bins_for(samples, dimension):
    return int(np.clip(int((samples / 40.0) ** (1.0 / dimension)), 8, 128))


def unit_ball_volume(r):
    """Volume of the euclidean unit ball in R^r."""
    return math.pi ** (r / 2.0) / math.gamma(r / 2.0 + 1.0)


def ball_volume(fields, delta, x0, samples=20000, seed=0, config=None, piece_counts=DEFAULT_PIECE_COUNTS, nbins=None):
    """Occupancy estimate of the time-one reachable set volume.

    The standard error comes from an even/odd split of the endpoint
    cloud, binned on the lattice of the full cloud. det_prediction is
    the frame Gram volume times the euclidean unit-ball volume of the
    frame size, so commuting unit-degree fields give ratio 1 exactly
    in the continuum.
    """
    n = check_shared_dimension(fields)
    pts = sample_endpoints(fields, delta, x0, samples, seed, config, piece_counts)
    if nbins is None:
        nbins = bins_for(samples, n)
    volume = occupancy_volume(pts, nbins)
    v_even = occupancy_volume(pts[0::2], nbins)
    v_odd = occupancy_volume(pts[1::2], nbins)
    stderr = 0.5 * abs(v_even - v_odd)
    indices, _, _ = select_frame(fields, delta, np.asarray(x0, dtype=float))
    det_pred = unit_ball_volume(len(indices)) * frame_gram_volume(fields, delta, x0, indices)
    return BallEstimate(delta, volume, stderr, det_pred, samples, seed)


def doubling_ratio(fields, delta, x0, samples=20000, seed=0, config=None, piece_counts=DEFAULT_PIECE_COUNTS):
    """Volume ratio between radius 2*delta and delta, same control seed.

    Returns (ratio, predicted, small_estimate, big_estimate) where
    predicted = 2^{sum of frame field homogeneities}.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    est1 = ball_volume(fields, delta, x0, samples, seed, config, piece_counts)
    est2 = ball_volume(fields, 2.0 * delta, x0, samples, seed, config, piece_counts)
    indices, _, _ = select_frame(fields, delta, np.asarray(x0, dtype=float))
    exponent = Fraction(0)
    for k in indices:
        exponent += sum(fields[k].degree.components, Fraction(0))
    predicted = 2.0 ** float(exponent)
    ratio = est2.volume / est1.volume if est1.volume > 0 else float("inf")
    return ratio, predicted, est1, est2


# -- membership and distance -------------------------------------------------


def ball_membership(fields, delta, x0, target, npieces=4, restarts=3, seed=0, config=None, tol=None):
    """Best control steering x0 toward target within time one.

    Minimizes the endpoint distance over npieces constant controls,
    each projected into the unit l2 ball. Returns (distance, pieces).
    Optimization is local (Powell with random restarts), so the
    distance is an upper bound on the true steering error.
    """
    scaled = scale_fields(delta, fields)
    q = len(scaled)
    target = np.asarray(target, dtype=float)
    config = config or FlowConfig()

    def project(z):
        pieces = z.reshape(1, npieces, q).copy()
        norms = np.linalg.norm(pieces, axis=-1, keepdims=True)
        return pieces / np.maximum(norms, 1.0)

    def objective(z):
        end = flow_piecewise(scaled, project(z), x0, config)[0]
        return float(np.sum((end - target) ** 2))

    best_val = np.inf
    best_z = None
    for r in range(restarts):
        rng = rng_for(seed, 1000 + r)
        z0 = rng.standard_normal(npieces * q) * 0.5 if r else np.zeros(npieces * q)
        res = minimize(objective, z0, method="Powell", options={"maxiter": 4000, "xtol": 1e-10})
        if res.fun < best_val:
            best_val, best_z = res.fun, res.x
    dist = math.sqrt(max(0.0, best_val))
    return dist, project(best_z)[0]


def cc_distance(fields, x0, target, scale_hi=4.0, iters=16, npieces=4, seed=0, reach_tol=1e-3):
    """Bisect the smallest s with target reachable at radius s (isotropic delta).

    Coarse by construction: each membership test is a local
    optimization. Intended for small demo problems.
    """
    lo, hi = 0.0, scale_hi
    d_hi, _ = ball_membership(fields, hi, x0, target, npieces, seed=seed)
    if d_hi > reach_tol * max(1.0, float(np.linalg.norm(np.asarray(target) - np.asarray(x0)))):
        return float("inf")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        d, _ = ball_membership(fields, mid, x0, target, npieces, seed=seed)
        if d <= reach_tol * max(1.0, hi):
            hi = mid
        else:
            lo = mid
    return hi
