"""Vector fields with multi-parameter formal degrees.

A weighted field is a pair (X, d): a smooth vector field on R^n and a
degree vector d in [0, inf)^nu saying how X scales under the
multi-parameter dilations delta = (delta_1, ..., delta_nu). The module
covers the algebra those pairs generate: scaling, commutators, closure
under brackets up to a degree cap, and the deformation field of a
parametrized family gamma_t together with its Taylor coefficient fields.

Fields carry an optional exact polynomial form (see poly.py); brackets
of polynomial fields are computed symbolically, everything else falls
back to central differences.
"""

import itertools
from fractions import Fraction

import numpy as np

from .errors import (
    ConditioningError,
    DimensionMismatchError,
    GrowthError,
    InversionError,
    UnsupportedInputError,
)
from .poly import Poly
from .util import sobol_points

#: step for finite-difference brackets, relative to the domain scale
FD_STEP = 1e-4
#: Newton inversion settings for gamma_t^{-1}
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
#: step for the epsilon-derivative defining the deformation field
EPS_STEP = 1e-5


def as_fractions(values):
    """Coerce a degree-like sequence to a tuple of exact Fractions."""
    out = []
    for v in np.atleast_1d(values):
        if isinstance(v, Fraction):
            out.append(v)
        elif isinstance(v, (int, np.integer)):
            out.append(Fraction(int(v)))
        else:
            out.append(Fraction(v).limit_denominator(10**9))
    return tuple(out)


class FormalDegree:
    """A nonzero vector in [0, inf)^nu, kept as exact rationals."""

    def __init__(self, components):
        self.components = as_fractions(components)
        if len(self.components) < 1:
            raise DimensionMismatchError("degree needs at least one component")
        if any(c < 0 for c in self.components):
            raise ValueError("degree components must be nonnegative")
        if all(c == 0 for c in self.components):
            raise ValueError("degree must have a strictly positive component")

    @property
    def nu(self):
        return len(self.components)

    def as_array(self):
        return np.array([float(c) for c in self.components])

    def __add__(self, other):
        return FormalDegree([a + b for a, b in zip(self.components, other.components)])

    def __eq__(self, other):
        return isinstance(other, FormalDegree) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return "FormalDegree(%s)" % (self.components,)

    def dumps(self):
        return ",".join(str(c) for c in self.components)

    @classmethod
    def loads(cls, text):
        return cls([Fraction(part) for part in text.split(",")])


def delta_power(delta, degree):
    """prod_mu delta_mu^{d^mu} with the convention 0^0 = 1.

    `degree` is a FormalDegree or a plain sequence; `delta` may be a
    scalar (same in every parameter) or a nu-vector.
    """
    comps = degree.components if isinstance(degree, FormalDegree) else as_fractions(degree)
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if delta.size == 1 and len(comps) > 1:
        delta = np.full(len(comps), delta[0])
    if delta.size != len(comps):
        raise DimensionMismatchError("delta has %d components, degree has %d" % (delta.size, len(comps)))
    out = 1.0
    for d, c in zip(delta, comps):
        if c != 0:
            out *= float(d) ** float(c)
    return out


class DilationExponents:
    """Exponents e_1, ..., e_N assigning each parameter coordinate a degree."""

    def __init__(self, rows):
        self.rows = tuple(FormalDegree(r) if not isinstance(r, FormalDegree) else r for r in rows)
        if not self.rows:
            raise DimensionMismatchError("need at least one exponent row")
        nu = self.rows[0].nu
        if any(r.nu != nu for r in self.rows):
            raise DimensionMismatchError("exponent rows disagree about nu")

    @property
    def N(self):
        return len(self.rows)

    @property
    def nu(self):
        return self.rows[0].nu

    def as_matrix(self):
        return np.stack([r.as_array() for r in self.rows])

    def coordinate_group(self, mu):
        """Indices j with e_j^mu != 0 (the t_mu block)."""
        return [j for j, r in enumerate(self.rows) if r.components[mu] != 0]


def dilate_param(delta, e, t):
    """Apply the multi-parameter dilation: coordinate j scales by prod delta_mu^{e_j^mu}."""
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != e.N:
        raise DimensionMismatchError("t has %d coordinates, e has %d rows" % (t.shape[-1], e.N))
    factors = np.array([delta_power(delta, row) for row in e.rows])
    return t * factors


class VectorFieldSpec:
    """A vector field: batch evaluator plus an optional exact polynomial form."""

    def __init__(self, dimension, evaluator, polys=None, label=""):
        self.dimension = int(dimension)
        self.evaluator = evaluator
        self.polys = tuple(polys) if polys is not None else None
        self.label = label
        if self.polys is not None and len(self.polys) != self.dimension:
            raise DimensionMismatchError("need one polynomial per coordinate")

    @classmethod
    def from_polys(cls, polys, label=""):
        polys = tuple(polys)
        dim = len(polys)

        def evaluator(x):
            x = np.asarray(x, dtype=float)
            return np.stack([p(x) for p in polys], axis=-1)

        return cls(dim, evaluator, polys, label=label)

    @classmethod
    def from_callable(cls, dimension, fn, polys=None, label="", check_box=1.0, rtol=1e-12):
        spec = cls(dimension, fn, polys, label=label)
        if polys is not None:
            pts = sobol_points(16, dimension, check_box)
            sym = np.stack([p(pts) for p in polys], axis=-1)
            num = np.asarray(fn(pts), dtype=float)
            scale = max(1.0, float(np.max(np.abs(sym))))
            if np.max(np.abs(sym - num)) > rtol * scale:
                raise UnsupportedInputError("evaluator disagrees with symbolic form")
        return spec

    def __call__(self, x):
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)

    @property
    def symbolic(self):
        return self.polys is not None

    def scaled(self, factor, label=None):
        factor = float(factor)
        polys = tuple(p * factor for p in self.polys) if self.symbolic else None
        ev = self.evaluator
        return VectorFieldSpec(
            self.dimension,
            lambda x, _f=factor, _ev=ev: _f * np.asarray(_ev(x), dtype=float),
            polys,
            label=label if label is not None else self.label,
        )

    def is_zero(self, box=1.0, tol=1e-13):
        if self.symbolic:
            return all(p.is_zero() for p in self.polys)
        vals = self(sobol_points(32, self.dimension, box))
        return float(np.max(np.abs(vals))) <= tol


class WeightedField:
    def __init__(self, field, degree):
        self.field = field
        self.degree = degree if isinstance(degree, FormalDegree) else FormalDegree(degree)

    def __repr__(self):
        return "WeightedField(%s, %s)" % (self.field.label or "field", self.degree)


def check_shared_dimension(fields):
    dims = {f.field.dimension if isinstance(f, WeightedField) else f.dimension for f in fields}
    if len(dims) != 1:
        raise DimensionMismatchError("fields disagree about the ambient dimension")
    return dims.pop()


def scale_fields(delta, fields):
    """The list delta^{d_j} X_j as plain VectorFieldSpecs."""
    check_shared_dimension(fields)
    return [wf.field.scaled(delta_power(delta, wf.degree)) for wf in fields]


def commutator(X, Y, fd_step=None, domain_scale=1.0):
    """The bracket [X, Y] = XY - YX as a vector field.

    Exact when both fields carry polynomial forms; otherwise central
    differences with step FD_STEP * domain_scale.
    """
    if X.dimension != Y.dimension:
        raise DimensionMismatchError("bracket of fields on different spaces")
    n = X.dimension
    if X.symbolic and Y.symbolic:
        polys = []
        for i in range(n):
            acc = Poly.zero(n)
            for k in range(n):
                acc = acc + X.polys[k] * Y.polys[i].diff(k) - Y.polys[k] * X.polys[i].diff(k)
            polys.append(acc)
        return VectorFieldSpec.from_polys(polys, label="[%s,%s]" % (X.label, Y.label))

    h = (fd_step if fd_step is not None else FD_STEP) * domain_scale

    def evaluator(x):
        x = np.asarray(x, dtype=float)
        Xv, Yv = X(x), Y(x)
        out = np.zeros_like(Xv)
        for k in range(n):
            ek = np.zeros(n)
            ek[k] = h
            dY = (Y(x + ek) - Y(x - ek)) / (2 * h)
            dX = (X(x + ek) - X(x - ek)) / (2 * h)
            out += Xv[..., k : k + 1] * dY - Yv[..., k : k + 1] * dX
        return out

    return VectorFieldSpec(n, evaluator, label="[%s,%s]" % (X.label, Y.label))


def _proportional(values_a, values_b, rtol=1e-8):
    """Whether flattened sample values differ by a constant factor."""
    a = values_a.ravel()
    b = values_b.ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return na == nb
    lam = float(a @ b) / float(a @ a)
    return np.linalg.norm(lam * a - b) <= rtol * nb


def generate_finite_list(seeds, degree_cap, max_fields=64, sample_box=1.0, dedup_rtol=1e-8):
    """Close a seed list under brackets, keeping degrees <= cap componentwise.

    Bracket degrees add. Fields pointwise proportional (constant factor,
    32 quasi-random sample points) to an existing entry are dropped. A
    closure larger than `max_fields` raises GrowthError: the numerical
    signal that no finite list exists under this cap.
    """
    if not seeds:
        raise ValueError("need at least one seed field")
    dim = check_shared_dimension(seeds)
    cap = as_fractions(degree_cap)
    samples = sobol_points(32, dim, sample_box)

    out = list(seeds)
    values = [wf.field(samples) for wf in out]
    seen_pairs = set()
    frontier = list(range(len(out)))
    while frontier:
        pairs = []
        for j in frontier:
            for i in range(len(out)):
                key = (min(i, j), max(i, j))
                if i == j or key in seen_pairs:
                    continue
                seen_pairs.add(key)
                pairs.append(key)
        frontier = []
        for i, j in pairs:
            d = out[i].degree + out[j].degree
            if any(a > b for a, b in zip(d.components, cap)):
                continue
            br = commutator(out[i].field, out[j].field, domain_scale=sample_box)
            vals = br(samples)
            if float(np.max(np.abs(vals))) <= 1e-13:
                continue
            if any(_proportional(v, vals, dedup_rtol) for v in values):
                continue
            out.append(WeightedField(br, d))
            values.append(vals)
            frontier.append(len(out) - 1)
            if len(out) > max_fields:
                raise GrowthError("bracket closure exceeded %d fields" % max_fields)
    return out


class GammaSpec:
    """A parametrized family of maps gamma_t with gamma_0 = identity.

    evaluator(t, x): t is a single N-vector, x an (..., n) batch.
    """

    def __init__(self, N, n, evaluator, rho=1.0, label=""):
        self.N = int(N)
        self.n = int(n)
        self.evaluator = evaluator
        self.rho = float(rho)
        self.label = label

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        if t.shape != (self.N,):
            raise DimensionMismatchError("t must have shape (%d,)" % self.N)
        return np.asarray(self.evaluator(t, np.asarray(x, dtype=float)), dtype=float)

    def check_identity_at_zero(self, box=1.0, tol=1e-12):
        x = sobol_points(8, self.n, box)
        return float(np.max(np.abs(self(np.zeros(self.N), x) - x))) <= tol

    def inverse(self, t, x, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER):
        """Solve gamma_t(z) = x by Newton iteration started at z = x."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pts = x[None, :] if squeeze else x.reshape(-1, self.n)
        z = pts.copy()
        h = 1e-6
        for _ in range(maxiter):
            fz = self(t, z)
            res = fz - pts
            if float(np.max(np.abs(res))) <= tol:
                break
            jac = np.empty(z.shape + (self.n,))
            for k in range(self.n):
                ek = np.zeros(self.n)
                ek[k] = h
                jac[..., k] = (self(t, z + ek) - self(t, z - ek)) / (2 * h)
            try:
                step = np.linalg.solve(jac, res[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise InversionError("singular Jacobian in Newton inversion") from exc
            z = z - step
        else:
            raise InversionError("Newton inversion did not converge in %d steps" % maxiter)
        z = z.reshape(x.shape)
        return z


def compute_W(gamma, t, x, eps_step=EPS_STEP):
    """Deformation field W(t, x) = d/deps|_{eps=1} gamma_{eps t}(gamma_t^{-1}(x))."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if float(np.linalg.norm(t)) == 0.0:
        return np.zeros_like(x)
    z = gamma.inverse(t, x)
    up = gamma((1.0 + eps_step) * t, z)
    dn = gamma((1.0 - eps_step) * t, z)
    return (up - dn) / (2 * eps_step)


def _multi_indices(N, order):
    """All alpha in N^N with 1 <= |alpha| <= order, lexicographic."""
    out = []
    for total in range(1, order + 1):
        for alpha in itertools.product(range(total + 1), repeat=N):
            if sum(alpha) == total:
                out.append(alpha)
    return out


def taylor_fields(gamma, e, order, stencil_radius=None, cond_limit=1e8):
    """Taylor coefficient fields X_alpha of the deformation field.

    W(t, x) is sampled on a tensor stencil of 5 points per t-coordinate
    and fit by least squares against the monomials t^alpha, 0 < |alpha|
    <= order. Returns a list of (alpha, VectorFieldSpec, deg) with
    deg(alpha) = sum_j alpha_j e_j as a FormalDegree-compatible tuple.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if e.N != gamma.N:
        raise DimensionMismatchError("exponents and gamma disagree about N")
    radius = stencil_radius if stencil_radius is not None else 0.1 * gamma.rho
    axis = np.linspace(-radius, radius, 5)
    stencil = np.stack(
        [g.ravel() for g in np.meshgrid(*([axis] * gamma.N), indexing="ij")], axis=-1
    )
    alphas = _multi_indices(gamma.N, order)
    design = np.stack([np.prod(stencil**np.array(a), axis=1) for a in alphas], axis=1)
    cond = np.linalg.cond(design)
    if cond > cond_limit:
        raise ConditioningError("stencil design matrix condition %.3g" % cond)
    pinv = np.linalg.pinv(design)  # (n_alpha, n_stencil)

    def coeffs_at(x):
        x = np.asarray(x, dtype=float)
        Ws = np.stack([compute_W(gamma, t, x) for t in stencil])  # (S, ..., n)
        return np.tensordot(pinv, Ws, axes=(1, 0))  # (n_alpha, ..., n)

    out = []
    for idx, alpha in enumerate(alphas):
        deg = [Fraction(0)] * e.nu
        for j, aj in enumerate(alpha):
            if aj:
                deg = [d + aj * c for d, c in zip(deg, e.rows[j].components)]

        def evaluator(x, _idx=idx):
            return coeffs_at(x)[_idx]

        spec = VectorFieldSpec(gamma.n, evaluator, label="X_%s" % (alpha,))
        out.append((alpha, spec, tuple(deg)))
    return out


def pure_power_fields(taylor_output):
    """Keep entries whose degree is nonzero in exactly one parameter component."""
    out = []
    for alpha, spec, deg in taylor_output:
        if sum(1 for c in deg if c != 0) == 1:
            out.append((alpha, spec, deg))
    return out


def check_commutator_certificate(fields, delta, samples):
    """Least-squares test of bracket closure within the scaled span.

    For every pair (i, j) and sample x, solve
    [delta^{d_i} X_i, delta^{d_j} X_j](x) = sum_k c_k delta^{d_k} X_k(x)
    by minimum-norm least squares. Returns (worst residual, largest |c|).
    """
    dim = check_shared_dimension(fields)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    scaled_factors = [delta_power(delta, wf.degree) for wf in fields]
    span = np.stack([f * wf.field(samples) for f, wf in zip(scaled_factors, fields)], axis=-1)
    worst_res = 0.0
    worst_coef = 0.0
    for i, j in itertools.combinations(range(len(fields)), 2):
        bracket = commutator(fields[i].field, fields[j].field)
        factor = scaled_factors[i] * scaled_factors[j]
        rhs = factor * bracket(samples)
        for s in range(samples.shape[0]):
            A = span[s]  # (n, q)
            b = rhs[s]
            c, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
            res = float(np.linalg.norm(A @ c - b))
            worst_res = max(worst_res, res)
            worst_coef = max(worst_coef, float(np.max(np.abs(c))) if c.size else 0.0)
    return worst_res, worst_coef


# -- plain-text serialization ------------------------------------------------


def dump_field(spec):
    """One line per coordinate; requires the symbolic form."""
    if not spec.symbolic:
        raise UnsupportedInputError("only symbolic fields serialize")
    return "\n".join(p.dumps() for p in spec.polys)


def load_field(text, dimension):
    lines = text.splitlines()
    if len(lines) != dimension:
        raise DimensionMismatchError("expected %d coordinate lines, got %d" % (dimension, len(lines)))
    return VectorFieldSpec.from_polys([Poly.loads(ln, dimension) for ln in lines])


def dump_weighted_list(fields):
    dim = check_shared_dimension(fields)
    nu = fields[0].degree.nu
    lines = ["nvars=%d nu=%d count=%d" % (dim, nu, len(fields))]
    for wf in fields:
        lines.append("degree %s" % wf.degree.dumps())
        lines.append(dump_field(wf.field))
    return "\n".join(lines) + "\n"


def load_weighted_list(text):
    lines = text.splitlines()
    header = dict(part.split("=") for part in lines[0].split())
    dim, nu, count = int(header["nvars"]), int(header["nu"]), int(header["count"])
    fields = []
    pos = 1
    for _ in range(count):
        if not lines[pos].startswith("degree "):
            raise ValueError("malformed field list near line %d" % (pos + 1))
        degree = FormalDegree.loads(lines[pos][len("degree ") :])
        if degree.nu != nu:
            raise DimensionMismatchError("degree arity differs from header")
        block = "\n".join(lines[pos + 1 : pos + 1 + dim])
        fields.append(WeightedField(load_field(block, dim), degree))
        pos += 1 + dim
    return fields
