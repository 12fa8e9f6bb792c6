"""Empirical operator-norm estimation and the block-pair calculus.

L2 norms come from power iteration on T*T (exact adjoints make this
reliable); other p are probed from below only. Decay measurements
group pair norms by separation and fit a dyadic rate on the group
maxima, matching one-sided bounds. The near-diagonal sum U_M, its
remainder R_M, and the truncated Neumann inverse V_M are built as
handles on top of a shared block family.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import ContractionError, FitError
from .grid import GridFunction
from .operators import INF, LinearOperatorHandle
from .util import rng_for, write_csv

NOISE_FLOOR = 1e-12


class NormEstimate:
    def __init__(self, value, method, iters, residual, p, label="", converged=True):
        self.value = float(value)
        self.method = method
        self.iters = int(iters)
        self.residual = float(residual)
        self.p = p
        self.label = label
        self.converged = converged

    def __repr__(self):
        return "NormEstimate(%s, p=%s, %.6g)" % (self.label or self.method, self.p, self.value)


def norm_estimates_csv(estimates, path=None):
    header = ["label", "p", "value", "method", "iters", "residual"]
    rows = [[e.label, e.p, e.value, e.method, e.iters, e.residual] for e in estimates]
    return write_csv(path, header, rows)


def l2_opnorm(handle, tol=1e-6, max_iter=200, seed=0, label=""):
    """Largest singular value by power iteration on T*T."""
    rng = rng_for(seed, 0)
    v = rng.standard_normal(handle.grid.size)
    v /= np.linalg.norm(v)
    adj = handle.T
    sigma = 0.0
    residual = float("inf")
    converged = False
    for it in range(1, max_iter + 1):
        w = adj(handle(v))
        lam = float(np.dot(v, w))
        norm_w = float(np.linalg.norm(w))
        if norm_w <= 1e-300:
            return NormEstimate(0.0, "power-iteration", it, 0.0, 2, label, True)
        new_sigma = math.sqrt(max(lam, 0.0))
        residual = float(np.linalg.norm(w - lam * v)) / max(norm_w, 1e-300)
        done = abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300) and it > 2
        sigma = new_sigma
        v = w / norm_w
        if done:
            converged = True
            break
    return NormEstimate(sigma, "power-iteration", it, residual, 2, label, converged)


# -- probe families ----------------------------------------------------------


def probe_function(grid, rng, kind=None):
    """One random probe: tensor Gaussian, dyadic sign field, or smooth noise."""
    if kind is None:
        kind = ("gauss", "chess", "noise")[rng.integers(3)]
    pts = grid.points()
    if kind == "gauss":
        center = rng.uniform(-0.5 * grid.L, 0.5 * grid.L, size=grid.n)
        width = rng.uniform(0.1, 0.4) * grid.L
        return np.exp(-np.sum((pts - center) ** 2, axis=1) / (2 * width**2))
    if kind == "chess":
        k = int(rng.integers(1, 4))
        block = grid.L * 2.0**-k
        cells = np.floor((pts + grid.L) / block).astype(np.int64)
        signs = rng.integers(0, 2, size=int(np.max(cells)) + 1) * 2 - 1
        out = np.ones(grid.size)
        for axis_i in range(grid.n):
            out *= signs[cells[:, axis_i]]
            signs = rng.integers(0, 2, size=signs.size) * 2 - 1
        return out.astype(float)
    if kind == "noise":
        vals = rng.standard_normal((grid.P,) * grid.n)
        for _ in range(2):
            acc = vals.copy()
            for axis_i in range(grid.n):
                acc = acc + np.roll(vals, 1, axis=axis_i) + np.roll(vals, -1, axis=axis_i)
            vals = acc / (1 + 2 * grid.n)
        return vals.ravel()
    raise ValueError("unknown probe kind %r" % kind)


def lp_opnorm_lower(handle, p, trials=30, seed=0, label=""):
    """Certified lower bound for the L^p operator norm.

    Probes: the three random families plus perturbations of the best
    probe found so far (hill climbing, no derivatives).
    """
    best = 0.0
    best_probe = None
    evals = 0
    for t in range(trials):
        rng = rng_for(seed, 7000 + t)
        if best_probe is not None and t % 3 == 2:
            probe = best_probe + 0.25 * rng.standard_normal(handle.grid.size) * float(
                np.max(np.abs(best_probe))
            )
        else:
            probe = probe_function(handle.grid, rng)
        f = GridFunction(handle.grid, probe)
        denom = f.lp_norm(p)
        if denom <= 1e-300:
            continue
        ratio = handle.apply(f).lp_norm(p) / denom
        evals += 1
        if ratio > best:
            best = ratio
            best_probe = probe
    return NormEstimate(best, "random-probe", evals, 0.0, p, label)


# -- decay fits --------------------------------------------------------------


class DecayFit:
    """Dyadic decay rate fitted on per-separation group maxima."""

    def __init__(self, mode, p, group_points, eps, r2, zero_family=False, seed=0):
        self.mode = mode
        self.p = p
        self.group_points = list(group_points)  # (separation, max norm)
        self.eps = float(eps)
        self.r2 = float(r2)
        self.zero_family = zero_family
        self.seed = seed

    @property
    def s_range(self):
        ss = [s for s, _ in self.group_points]
        return (min(ss), max(ss)) if ss else (0, 0)

    def __repr__(self):
        if self.zero_family:
            return "DecayFit(%s, zero family)" % self.mode
        return "DecayFit(%s, eps=%.3f, r2=%.3f)" % (self.mode, self.eps, self.r2)


def decay_fit_csv(fits, path=None):
    header = ["mode", "p", "separation", "norm", "fitted_eps", "r2", "seed"]
    rows = []
    for fit in fits:
        for s, m in fit.group_points:
            rows.append([fit.mode, fit.p, s, m, fit.eps, fit.r2, fit.seed])
    return write_csv(path, header, rows)


def fit_group_maxima(points, mode, p, zero_tol=1e-10, seed=0):
    """Least-squares rate on -log2 of group maxima above the noise floor."""
    groups = {}
    for s, m in points:
        groups[s] = max(groups.get(s, 0.0), m)
    group_points = sorted(groups.items())
    if all(m <= zero_tol for _, m in group_points):
        return DecayFit(mode, p, group_points, 0.0, 1.0, zero_family=True, seed=seed)
    usable = [(s, m) for s, m in group_points if m > NOISE_FLOOR]
    if len(usable) < 3:
        raise FitError("need at least 3 separation groups, have %d" % len(usable))
    s = np.array([float(si) for si, _ in usable])
    y = np.array([-math.log2(mi) for _, mi in usable])
    A = np.stack([s, np.ones_like(s)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    eps = float(coef[0])
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res < 1e-20 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return DecayFit(mode, p, group_points, eps, r2, seed=seed)


def sample_pairs(index_list, separations, per_group, seed=0):
    """Deterministic pair sample with prescribed l-infinity separations."""
    out = []
    for s in separations:
        candidates = [
            (j, k)
            for j, k in itertools.product(index_list, index_list)
            if max(abs(a - b) for a, b in zip(j, k)) == s
        ]
        if not candidates:
            continue
        rng = rng_for(seed, 9000 + s)
        take = min(per_group, len(candidates))
        chosen = rng.choice(len(candidates), size=take, replace=False)
        out.extend(candidates[int(c)] for c in sorted(chosen))
    return out


def orthogonality_decay(factory, mode, pairs, p=2, seed=0, kernel=None, mu0=None, tol=1e-5):
    """Measured pair norms vs separation for one composition mode.

    Modes: DD* and D*D pair difference blocks; BD pairs the alternating
    difference with a block; TD takes index triples (j1, j2, j3) and
    measures D_{j1} T_{j2} D_{j3} against the diameter of the triple.
    """
    points = []
    for pair in pairs:
        if mode == "DD*":
            j, k = pair
            handle = factory.D_full(j) @ factory.D_full(k).T
            sep = max(abs(a - b) for a, b in zip(j, k))
        elif mode == "D*D":
            j, k = pair
            handle = factory.D_full(j).T @ factory.D_full(k)
            sep = max(abs(a - b) for a, b in zip(j, k))
        elif mode == "BD":
            j, k = pair
            handle = factory.B_handle(j, mu0) @ factory.D_full(k)
            sep = max(abs(a - b) for a, b in zip(j, k))
        elif mode == "TD":
            j1, j2, j3 = pair
            handle = factory.D_full(j1) @ factory.T_piece(kernel, j2) @ factory.D_full(j3)
            sep = max(
                max(abs(a - b) for a, b in zip(u, v))
                for u, v in itertools.combinations((j1, j2, j3), 2)
            )
        else:
            raise ValueError("unknown mode %r" % mode)
        est = l2_opnorm(handle, tol=tol, seed=seed ^ (len(points) + 1))
        points.append((sep, est.value))
    return fit_group_maxima(points, mode, p, seed=seed)


# -- near-diagonal calculus --------------------------------------------------


class BlockFamily:
    """The full D_j family over an index set, with cached handles."""

    def __init__(self, factory, index_list):
        self.factory = factory
        self.index_list = [tuple(j) for j in index_list]
        self.index_set = set(self.index_list)
        self._handles = {}

    def handle(self, j):
        j = tuple(j)
        if j not in self._handles:
            self._handles[j] = self.factory.D_full(j)
        return self._handles[j]

    def sum_handle(self):
        total = None
        for j in self.index_list:
            h = self.handle(j)
            total = h if total is None else total + h
        return total

    def window(self, j, M):
        nu = len(j)
        out = []
        for l in itertools.product(range(-M, M + 1), repeat=nu):
            k = tuple(a + b for a, b in zip(j, l))
            if k in self.index_set:
                out.append(k)
        return out


def build_UM_RM(factory, M, index_list, measure_discrepancy=True, seed=0):
    """Near-diagonal sum and its complement against the cutoff identity.

    U_M applies every D_j D_k with |j - k|_inf <= M through a factored
    sweep (one pass computing all D_k f, windowed partial sums, one
    pass back). R_M is the multiplication by the fourth cutoff power
    minus U_M; the discrepancy against the literal far-pair sum,
    which is independent of M, is measured once as the norm of
    psi^{4 nu} - (sum_j D_j)^2.
    """
    family = BlockFamily(factory, index_list)
    grid = factory.grid
    nu = factory.nu
    psi_pow = factory.chain.psim3.values ** (4 * nu)
    windows = {j: family.window(j, M) for j in family.index_list}

    def u_apply(v):
        g = {k: family.handle(k)(v) for k in family.index_list}
        out = np.zeros(grid.size)
        for j in family.index_list:
            w = np.zeros(grid.size)
            for k in windows[j]:
                w += g[k]
            out += family.handle(j)(w)
        return out

    def u_adjoint(v):
        g = {j: family.handle(j).T(v) for j in family.index_list}
        out = np.zeros(grid.size)
        for k in family.index_list:
            w = np.zeros(grid.size)
            for j in family.index_list:
                if k in windows[j]:
                    w += g[j]
            out += family.handle(k).T(w)
        return out

    U = LinearOperatorHandle(grid, u_apply, u_adjoint, label="U[M=%d]" % M)
    mult = LinearOperatorHandle.multiplication(grid, psi_pow, label="cutoff^4nu")
    R = mult - U
    R.label = "R[M=%d]" % M
    discrepancy = None
    if measure_discrepancy:
        total = family.sum_handle()
        boundary = mult - (total @ total)
        discrepancy = l2_opnorm(boundary, tol=1e-4, seed=seed, label="boundary")
    return U, R, discrepancy


class NeumannConfig:
    def __init__(self, M, m_max, p0=2, contraction=None):
        self.M = int(M)
        self.m_max = int(m_max)
        self.p0 = p0
        self.contraction = contraction

    @property
    def tail_bound(self):
        c = self.contraction
        if c is None or c >= 1.0:
            return float("inf")
        return c ** (self.m_max + 1) / (1.0 - c)


def build_VM(cfg, R_handle, psi_values):
    """Truncated Neumann sum sum_m psi (R psi)^m as a handle.

    cfg.contraction must hold a measured norm of R compose psi below 1;
    the recorded tail bound is contraction^{m_max+1}/(1-contraction).
    """
    if cfg.contraction is None or not cfg.contraction < 1.0:
        raise ContractionError(
            "Neumann series needs measured contraction below 1",
            measured=cfg.contraction,
        )
    grid = R_handle.grid
    psi = np.asarray(psi_values, dtype=float).ravel()
    adj = R_handle.T

    def forward(v):
        u = v
        acc = psi * v
        for _ in range(cfg.m_max):
            u = R_handle(psi * u)
            acc = acc + psi * u
        return acc

    def adjoint(v):
        # transpose of sum_m psi (R psi)^m is sum_m (psi R*)^m psi
        u = psi * v
        acc = u
        for _ in range(cfg.m_max):
            u = psi * adj(u)
            acc = acc + u
        return acc

    return LinearOperatorHandle(grid, forward, adjoint, label="V[M=%d,m=%d]" % (cfg.M, cfg.m_max))


def square_function(family, f):
    """Pointwise l2 aggregation of the block outputs."""
    acc = np.zeros(family.factory.grid.size)
    for j in family.index_list:
        out = family.handle(j)(f.values)
        acc += out * out
    return GridFunction(family.factory.grid, np.sqrt(acc))


def rademacher_probe(factory, J, p=2, trials=20, seed=0):
    """Worst probe ratio of random-sign block sums.

    Signs factor per parameter component, so the signed full-index sum
    is the composition of per-component signed sums.
    """
    grid = factory.grid
    worst = 0.0
    for t in range(trials):
        rng = rng_for(seed, 500 + t)
        handle = None
        for mu in range(factory.nu):
            signs = rng.integers(0, 2, size=J + 1) * 2 - 1
            part = None
            for j in range(J + 1):
                term = factory.D_handle(mu, j).scaled(float(signs[j]))
                part = term if part is None else part + term
            handle = part if handle is None else handle @ part
        probe = probe_function(grid, rng)
        f = GridFunction(grid, probe)
        denom = f.lp_norm(p)
        if denom <= 1e-300:
            continue
        worst = max(worst, handle.apply(f).lp_norm(p) / denom)
    return worst


# -- vector-valued families --------------------------------------------------


def sequence_lp_norm(components, grid, p):
    """L^p norm of the pointwise l2 aggregation of a function sequence."""
    acc = np.zeros(grid.size)
    for v in components:
        acc += v * v
    return GridFunction(grid, np.sqrt(acc)).lp_norm(p)


def vector_valued_norm(handles, grid, p, trials=8, seed=0):
    """Probe lower bound of the sequence-space norm of {f_j} -> {T_j f_j}."""
    best = 0.0
    keys = sorted(handles.keys())
    for t in range(trials):
        rng = rng_for(seed, 300 + t)
        fs = {j: probe_function(grid, rng) for j in keys}
        denom = sequence_lp_norm(list(fs.values()), grid, p)
        if denom <= 1e-300:
            continue
        outs = []
        for j in keys:
            h = handles[j]
            outs.append(np.zeros(grid.size) if h is None else h(fs[j]))
        best = max(best, sequence_lp_norm(outs, grid, p) / denom)
    return best


def make_T_family(factory, kernel, index_list, k1, k2):
    """Handles j -> D_j T_{j+k1} D_{j+k2}, None when shifts leave the set."""
    out = {}
    kernel_set = {tuple(j) for j in kernel.indices}
    members = {tuple(i) for i in index_list}
    for j in index_list:
        a = tuple(x + y for x, y in zip(j, k1))
        b = tuple(x + y for x, y in zip(j, k2))
        if a not in kernel_set or b not in members:
            out[tuple(j)] = None
            continue
        out[tuple(j)] = factory.D_full(j) @ factory.T_piece(kernel, a) @ factory.D_full(b)
    return out


def make_B_family(factory, index_list, k, mu0=None):
    """Handles j -> B_j D_{j+k}, None when the shift leaves the set."""
    out = {}
    members = {tuple(j) for j in index_list}
    for j in index_list:
        b = tuple(x + y for x, y in zip(j, k))
        if b not in members:
            out[tuple(j)] = None
            continue
        out[tuple(j)] = factory.B_handle(j, mu0) @ factory.D_full(b)
    return out


def vector_valued_decay(family_builder, shifts, grid, p=2, trials=8, seed=0, mode="TD-seq"):
    """Fit the decay of sequence-space norms against the shift size.

    family_builder(shift) -> dict j -> handle (or None); shift is
    either a single k tuple or a (k1, k2) pair, and the separation is
    the l1 size of the concatenated shift.
    """
    points = []
    for shift in shifts:
        handles = family_builder(shift)
        if isinstance(shift[0], tuple):
            sep = sum(abs(c) for k in shift for c in k)
        else:
            sep = sum(abs(c) for c in shift)
        if all(h is None for h in handles.values()):
            points.append((sep, 0.0))
            continue
        points.append((sep, vector_valued_norm(handles, grid, p, trials, seed)))
    return fit_group_maxima(points, mode, p, seed=seed)


def bootstrap_pset(start=2, steps=8):
    """Exact iteration q -> 2q/(q+1) from the given start."""
    q = Fraction(start)
    out = [q]
    for _ in range(steps):
        q = 2 * q / (q + 1)
        out.append(q)
    return out
