"""Bump families and truncated dyadic kernels.

A Bump is a finite sum of tensor terms c * prod_k (1/r_k) B_k(t_k/r_k)
with named 1-D profiles B_k. Integrals, marginals, and dyadic dilations
are exact operations on the term list, so telescoping identities and
cancellation survive to machine precision instead of quadrature
tolerance. Quadrature only enters when validating a family against the
moment rule of its kernel class.

A DyadicKernel is a finite family {piece_j} over the chain-ordered
index set of the class (parameters mu0 <= nu), summed as
K = sum_j piece_j^(2^j).
"""

import itertools

import numpy as np

from .errors import DimensionMismatchError, KernelClassError, UnsupportedInputError
from .fields import DilationExponents
from .util import kahan_sum, sobol_points, write_csv
CANCEL_TOL = 1e-12


def _poly4(y):
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = (315.0 / 256.0) * (1.0 - yi * yi) ** 4
    return out


def _odd4(y):
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = (19683.0 / 4096.0) * yi * (1.0 - yi * yi) ** 4
    return out


#: name -> (vectorized profile on [-1, 1], exact mass)
PROFILES = {
    "poly4": (_poly4, 1.0),
    "odd4": (_odd4, 0.0),
}


class Bump:
    """Sum of tensor product terms; exact integral and dilation algebra.

    terms: tuple of (coef, axes), axes a tuple of (profile_name, radius)
    with one entry per coordinate.
    """

    def __init__(self, dimension, terms, tag="tensor-poly"):
        self.dimension = int(dimension)
        clean = []
        for coef, axes in terms:
            axes = tuple((str(p), float(r)) for p, r in axes)
            if len(axes) != self.dimension:
                raise DimensionMismatchError("term arity differs from dimension")
            for p, r in axes:
                if p not in PROFILES:
                    raise UnsupportedInputError("unknown profile %r" % p)
                if r <= 0:
                    raise ValueError("profile radius must be positive")
            clean.append((float(coef), axes))
        self.terms = tuple(clean)
        self.tag = tag

    @property
    def support_radius(self):
        if not self.terms:
            return 0.0
        return max(r for _, axes in self.terms for _, r in axes)

    def axis_radius(self, k):
        if not self.terms:
            return 0.0
        return max(axes[k][1] for _, axes in self.terms)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.shape[-1] != self.dimension:
            raise DimensionMismatchError("points have %d coordinates, bump has %d" % (t.shape[-1], self.dimension))
        out = np.zeros(t.shape[:-1])
        for coef, axes in self.terms:
            part = np.full(t.shape[:-1], coef)
            for k, (p, r) in enumerate(axes):
                part *= PROFILES[p][0](t[..., k] / r) / r
            out += part
        return out

    def integral(self):
        total = 0.0
        for coef, axes in self.terms:
            v = coef
            for p, _ in axes:
                v *= PROFILES[p][1]
            total += v
        return total

    def __add__(self, other):
        if self.dimension != other.dimension:
            raise DimensionMismatchError("bump dimensions differ")
        return Bump(self.dimension, self.terms + other.terms, tag=self.tag)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, factor):
        return Bump(self.dimension, tuple((c * factor, a) for c, a in self.terms), tag=self.tag)

    def simplify(self, tol=0.0):
        """Merge terms with identical axes; drop coefficients at or below tol."""
        merged = {}
        order = []
        for coef, axes in self.terms:
            if axes not in merged:
                merged[axes] = 0.0
                order.append(axes)
            merged[axes] += coef
        keep = [(merged[a], a) for a in order if abs(merged[a]) > tol]
        return Bump(self.dimension, keep, tag=self.tag)

    def dilated(self, factors):
        """Density-preserving dilation: coordinate k shrinks by factors[k].

        Each axis radius r becomes r / factors[k]; per-term coefficients
        and hence all integrals are untouched.
        """
        factors = np.atleast_1d(np.asarray(factors, dtype=float))
        if factors.size == 1:
            factors = np.full(self.dimension, factors[0])
        if factors.size != self.dimension:
            raise DimensionMismatchError("need one dilation factor per coordinate")
        terms = []
        for coef, axes in self.terms:
            terms.append((coef, tuple((p, r / f) for (p, r), f in zip(axes, factors))))
        return Bump(self.dimension, terms, tag=self.tag)

    def block_marginal(self, coords):
        """Integrate out the listed coordinates; exact on tensor terms."""
        coords = sorted(set(coords))
        keep = [k for k in range(self.dimension) if k not in coords]
        terms = []
        for coef, axes in self.terms:
            c = coef
            for k in coords:
                c *= PROFILES[axes[k][0]][1]
            terms.append((c, tuple(axes[k] for k in keep)))
        return Bump(len(keep), terms, tag=self.tag)

    def sampled_norms(self, max_order=1, points_per_axis=17):
        """Sup norms of the bump and its first partials on a tensor grid."""
        radii = [max(self.axis_radius(k), 1e-300) for k in range(self.dimension)]
        axes = [np.linspace(-r, r, points_per_axis) for r in radii]
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        out = {0: float(np.max(np.abs(self(grid))))}
        if max_order >= 1:
            worst = 0.0
            for k in range(self.dimension):
                h = 1e-5 * radii[k]
                ek = np.zeros(self.dimension)
                ek[k] = h
                d = (self(grid + ek) - self(grid - ek)) / (2 * h)
                worst = max(worst, float(np.max(np.abs(d))))
            out[1] = worst
        return out


def tensor_bump(profiles, radii, coef=1.0, tag="tensor-poly"):
    axes = tuple(zip(profiles, np.atleast_1d(np.asarray(radii, dtype=float)).tolist()))
    return Bump(len(axes), [(coef, axes)], tag=tag)


def make_bump(profile, N, a):
    """Unit-integral tensor bump of a named profile, supported in (-a, a)^N."""
    if profile not in PROFILES:
        raise UnsupportedInputError("unknown profile %r" % profile)
    mass = PROFILES[profile][1]
    if mass == 0.0:
        raise UnsupportedInputError("profile %r has zero mass; cannot normalize" % profile)
    return tensor_bump([profile] * N, [a] * N, coef=1.0 / mass**N)


def dilation_factors(j, e):
    """Per-coordinate factors 2^{j . e_k}; exact powers of two."""
    j = np.atleast_1d(np.asarray(j, dtype=float))
    if j.size != e.nu:
        raise DimensionMismatchError("index has %d components, e expects %d" % (j.size, e.nu))
    E = e.as_matrix()  # (N, nu)
    return 2.0 ** (E @ j)


def dilate_bump(bump, j, e):
    """The dyadic dilate piece^{(2^j)} under the exponent matrix e."""
    return bump.dilated(dilation_factors(j, e))


def index_set(mu0, nu, J):
    """All j in {0..J}^nu with j_{mu0} >= ... >= j_nu, lexicographic."""
    if not 1 <= mu0 <= nu:
        raise ValueError("need 1 <= mu0 <= nu")
    if J < 0:
        raise ValueError("J must be >= 0")
    out = []
    for j in itertools.product(range(J + 1), repeat=nu):
        if all(j[m - 1] >= j[m] for m in range(mu0, nu)):
            out.append(j)
    return out


def cancellation_required(j, m, mu0):
    """Whether piece_j must have zero mean in block m (0-based)."""
    if j[m] == 0:
        return False
    if m + 1 > mu0 and j[m] == j[m - 1]:
        return False
    return True


def block_coords(e, m):
    coords = e.coordinate_group(m)
    if not coords:
        raise KernelClassError("parameter component %d touches no coordinate" % m, group=m)
    return coords


def enforce_cancellation(bump, mu_set, e, correction_radius=None):
    """Project out the marginal of each designated block.

    Subtracts, per block, the block marginal times a unit-mass poly4
    profile on the block coordinates (radius = the bump's support
    radius, so support containment is automatic). Exact on tensor
    terms. Blocks are processed in increasing order; overlapping blocks
    still end with zero marginals because each projection preserves the
    total integral structure of the earlier ones.
    """
    out = bump
    for m in sorted(set(mu_set)):
        coords = block_coords(e, m)
        r = correction_radius if correction_radius is not None else bump.support_radius
        terms = []
        for coef, axes in out.terms:
            c = coef
            for k in coords:
                c *= PROFILES[axes[k][0]][1]
            if c == 0.0:
                continue
            new_axes = tuple(("poly4", r) if k in coords else axes[k] for k in range(out.dimension))
            terms.append((-c, new_axes))
        out = Bump(out.dimension, out.terms + tuple(terms), tag=out.tag).simplify()
    return out


def block_mean_residual(bump, coords, complement_samples=8, seed=11):
    """Largest |integral over the block| at sampled complementary points.

    The block integral goes through the exact per-term profile masses,
    so algebraically cancelled families report round-off, not the
    quadrature error a node rule would leave at the profile edges.
    """
    marginal = bump.block_marginal(coords).simplify(tol=0.0)
    comp = [k for k in range(bump.dimension) if k not in coords]
    if not comp:
        return abs(marginal.integral())
    comp_radii = np.array([max(bump.axis_radius(k), 1e-12) for k in comp])
    comp_pts = sobol_points(complement_samples, len(comp), 1.0, seed=seed) * comp_radii
    return float(np.max(np.abs(marginal(comp_pts))))


class DyadicKernel:
    """A validated finite family over the chain index set of its class."""

    def __init__(self, e, mu0, J, pieces, a):
        self.e = e
        self.mu0 = int(mu0)
        self.J = int(J)
        self.a = float(a)
        self.indices = index_set(self.mu0, e.nu, self.J)
        self.pieces = dict(pieces)
        missing = [j for j in self.indices if j not in self.pieces]
        if missing:
            raise KernelClassError("family misses index %s" % (missing[0],), index=missing[0])
        self.sup_bound = None

    @property
    def nu(self):
        return self.e.nu

    @property
    def N(self):
        return self.e.N

    def validate(self, tol=CANCEL_TOL):
        """Re-check the moment rule per piece; record the uniform sup bound."""
        worst_sup = 0.0
        for j in self.indices:
            piece = self.pieces[j]
            if piece.dimension != self.N:
                raise KernelClassError("piece %s has dimension %d, expected %d" % (j, piece.dimension, self.N), index=j)
            for m in range(self.nu):
                if not cancellation_required(j, m, self.mu0):
                    continue
                res = block_mean_residual(piece, block_coords(self.e, m))
                if res > tol:
                    raise KernelClassError(
                        "piece %s violates zero mean in block %d (residual %.3g)" % (j, m, res),
                        index=j,
                        group=m,
                    )
            worst_sup = max(worst_sup, piece.sampled_norms(max_order=0)[0])
        self.sup_bound = worst_sup
        return self

    def dilated_piece(self, j):
        return dilate_bump(self.pieces[j], j, self.e)

    def cancellation_flags(self, j):
        piece = self.pieces[j]
        flags = []
        for m in range(self.nu):
            res = block_mean_residual(piece, block_coords(self.e, m), complement_samples=4)
            flags.append(1 if res <= CANCEL_TOL else 0)
        return flags

    def dilated_sum_bump(self):
        """Sum of all dilated pieces as one simplified Bump (exact algebra)."""
        total = None
        for j in self.indices:
            piece = self.dilated_piece(j)
            total = piece if total is None else total + piece
        return total.simplify(tol=0.0)


def synth_kernel(family_rule, mu0, nu, J, e, a):
    """Build and validate a kernel from a rule j -> Bump."""
    if e.nu != nu:
        raise DimensionMismatchError("e expects nu=%d, got %d" % (e.nu, nu))
    pieces = {j: family_rule(j) for j in index_set(mu0, nu, J)}
    return DyadicKernel(e, mu0, J, pieces, a).validate()


def default_family(e, a, mu0, seed=0):
    """A generic compliant family: seeded radius jitter plus forced cancellation."""

    def rule(j):
        mix = sum((jm + 1) * 31**m for m, jm in enumerate(j))
        rng = np.random.default_rng(seed * 1000003 + mix)
        radii = a * (0.75 + 0.2 * rng.random(e.N))
        bump = tensor_bump(["poly4"] * e.N, radii)
        needed = [m for m in range(e.nu) if cancellation_required(j, m, mu0)]
        return enforce_cancellation(bump, needed, e, correction_radius=a)

    return rule


def make_product_kernel(factor_rules, splits, J, a):
    """Tensor nu one-parameter families into a product kernel (mu0 = nu).

    factor_rules: per factor, a map k -> Bump on R^{N_mu}. splits: the
    block sizes N_1, ..., N_nu. The exponent rows assign coordinate
    block mu degree 1 in component mu only.
    """
    nu = len(factor_rules)
    if len(splits) != nu:
        raise DimensionMismatchError("need one block size per factor")
    rows = []
    for m, size in enumerate(splits):
        if size < 1:
            raise UnsupportedInputError("empty factor block")
        row = [0] * nu
        row[m] = 1
        rows.extend([row] * size)
    e = DilationExponents(rows)

    def rule(j):
        bump = None
        for m in range(nu):
            factor = factor_rules[m](j[m])
            if factor.dimension != splits[m]:
                raise KernelClassError(
                    "factor %d piece has dimension %d, expected %d" % (m, factor.dimension, splits[m]),
                    index=j,
                    group=m,
                )
            bump = factor if bump is None else _tensor_product(bump, factor)
        return bump

    return synth_kernel(rule, nu, nu, J, e, a)


def _tensor_product(left, right):
    terms = []
    for cl, al in left.terms:
        for cr, ar in right.terms:
            terms.append((cl * cr, al + ar))
    return Bump(left.dimension + right.dimension, terms, tag=left.tag)


def make_delta0_family(phis, J, a):
    """The dyadic decomposition of the Dirac mass, truncated at depth J.

    Per factor: piece 0 is phi itself, every later piece is
    phi - phi^{(1/2)}, so the 2^j-dilates telescope and the full sum
    collapses to the tensor product of the phi^{(2^J)} exactly.
    """
    for phi in phis:
        if abs(phi.integral() - 1.0) > 1e-12:
            raise UnsupportedInputError("delta family factors need unit integral")

    def factor_rule(phi):
        diff = (phi - phi.dilated(0.5)).simplify()

        def rule(k):
            return phi if k == 0 else diff

        return rule

    return make_product_kernel(
        [factor_rule(phi) for phi in phis], [phi.dimension for phi in phis], J, a
    )


def kernel_eval(kernel, t):
    """K(t) = sum over the index set of dilated piece values."""
    t = np.asarray(t, dtype=float)
    vals = np.stack([kernel.dilated_piece(j)(t) for j in kernel.indices])
    return kahan_sum(vals, axis=0)


def product_estimate_check(kernel, order, samples, fd_rel=1e-2):
    """Worst constant sup |d^alpha K(t)| * prod_mu |t_mu|^{N_mu + |alpha_mu|}.

    alpha runs over all multi-indices of total order <= `order`;
    derivatives are nested central differences with steps relative to
    each sample's block scales, so orders beyond 2 get noisy.
    """
    if kernel.mu0 != kernel.nu:
        raise UnsupportedInputError("estimate check applies to product kernels")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    blocks = [block_coords(kernel.e, m) for m in range(kernel.nu)]

    def deriv(points, alpha):
        if not any(alpha):
            return kernel_eval(kernel, points)
        k = next(i for i, av in enumerate(alpha) if av)
        lower = tuple(av - (1 if i == k else 0) for i, av in enumerate(alpha))
        h = fd_rel * np.maximum(np.abs(points[:, k]), 1e-6)
        unit = np.zeros(points.shape[1])
        unit[k] = 1.0
        step = h[:, None] * unit
        return (deriv(points + step, lower) - deriv(points - step, lower)) / (2 * h)

    alphas = [
        alpha
        for total in range(order + 1)
        for alpha in itertools.product(range(total + 1), repeat=kernel.N)
        if sum(alpha) == total
    ]
    worst = 0.0
    for alpha in alphas:
        vals = np.abs(deriv(samples, alpha))
        weight = np.ones(samples.shape[0])
        for m, coords in enumerate(blocks):
            tm = np.linalg.norm(samples[:, coords], axis=1)
            weight *= tm ** (len(coords) + sum(alpha[k] for k in coords))
        worst = max(worst, float(np.max(vals * weight)))
    return worst


# -- manifest and grid dumps -------------------------------------------------


def kernel_manifest(kernel, path=None):
    """Plain text summary: header, exponent rows, then per-piece lines."""
    lines = ["%d,%d,%d,%d,%.17g" % (kernel.N, kernel.nu, kernel.mu0, kernel.J, kernel.a)]
    for row in kernel.e.rows:
        lines.append("e," + row.dumps())
    for j in kernel.indices:
        flags = kernel.cancellation_flags(j)
        lines.append(
            ",".join(str(c) for c in j)
            + ","
            + kernel.pieces[j].tag
            + ","
            + ",".join(str(f) for f in flags)
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def parse_kernel_manifest(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    N, nu, mu0, J, a = lines[0].split(",")
    head = {"N": int(N), "nu": int(nu), "mu0": int(mu0), "J": int(J), "a": float(a)}
    rows = []
    pos = 1
    while pos < len(lines) and lines[pos].startswith("e,"):
        rows.append(lines[pos][2:])
        pos += 1
    if len(rows) != head["N"]:
        raise ValueError("manifest has %d exponent rows, header says %d" % (len(rows), head["N"]))
    pieces = []
    for ln in lines[pos:]:
        parts = ln.split(",")
        j = tuple(int(p) for p in parts[: head["nu"]])
        tag = parts[head["nu"]]
        flags = [int(p) for p in parts[head["nu"] + 1 :]]
        pieces.append({"j": j, "tag": tag, "flags": flags})
    head["e"] = rows
    head["pieces"] = pieces
    return head


def bump_grid_csv(bump, points_per_axis=33, path=None):
    """Tabulate a bump on a tensor grid over its support box."""
    radii = [max(bump.axis_radius(k), 1e-12) for k in range(bump.dimension)]
    axes = [np.linspace(-r, r, points_per_axis) for r in radii]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    vals = bump(grid)
    header = ["t%d" % (k + 1) for k in range(bump.dimension)] + ["value"]
    rows = [list(grid[i]) + [vals[i]] for i in range(grid.shape[0])]
    return write_csv(path, header, rows)
