"""Discretized operators along parametrized families of maps.

Every operator here is a windowed quadrature of the same shape:

    (S f)(x) = out(x) * sum_i w_i p(u_i) tgt(y_i(x)) f~(y_i(x)),

with y_i(x) the flow or family map evaluated at scaled quadrature nodes
u_i, f~ multilinear interpolation, and out/tgt cutoffs from a nested
chain. Small node sets are assembled into sparse matrices; large ones
stay matrix-free with a scatter-transpose adjoint. Either way the
adjoint is the exact transpose of the discrete stencil, which is what
power iteration needs.

The OperatorFactory caches the single-parameter building blocks
(difference blocks D, averages A) and composes the multi-parameter
operators (full D_j, M at anisotropic scales, the alternating
difference B_j, truncated singular integrals) from them.
"""

import itertools
import math

import numpy as np
from scipy import sparse

from .errors import CoverageError, DimensionMismatchError, UnsupportedInputError
from .fields import GammaSpec, delta_power
from .flows import FlowConfig, flow_combo
from .grid import GridFunction
from .kernels import make_bump
from .util import tensor_quadrature

INF = math.inf
#: nodes per t-axis for windowed quadratures
DEFAULT_T_NODES = 16
#: assemble sparse when grid.size * node_count * 2^n stays below this
ASSEMBLY_BUDGET = 4_000_000
COVER_TOL = 1e-14

CUTOFF_NAMES = ("psi1", "psi2", "psi0", "psim1", "psim2", "psim3")
CUTOFF_RADII = (0.50, 0.58, 0.66, 0.74, 0.82, 0.90)
CUTOFF_WIDTH = 0.06


def smoothstep(u):
    """Quintic ramp: 0 at 0, 1 at 1, two flat derivatives at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def radial_cutoff(points, radius, width):
    """1 inside radius-width, 0 outside radius, smooth ramp between."""
    rho = np.linalg.norm(np.atleast_2d(points), axis=-1)
    return smoothstep((radius - rho) / width)


class CutoffChain:
    """The nested cutoffs psi1 < psi2 < psi0 < psim1 < psim2 < psim3.

    Radii are fixed fractions of the box half-width; consecutive gaps
    exceed the ramp width, which is what makes the nesting exact: each
    cutoff's support sits inside the next one's plateau.
    """

    def __init__(self, grid, radii=CUTOFF_RADII, width=CUTOFF_WIDTH):
        self.grid = grid
        self.radii = tuple(r * grid.L for r in radii)
        self.width = width * grid.L
        pts = grid.points()
        self.functions = {}
        self.closed_forms = {}
        for name, r in zip(CUTOFF_NAMES, self.radii):
            form = self._form(r)
            self.closed_forms[name] = form
            self.functions[name] = GridFunction(grid, form(pts))

    def _form(self, r):
        w = self.width

        def form(points):
            return radial_cutoff(points, r, w)

        return form

    def __getattr__(self, name):
        if name in CUTOFF_NAMES:
            return self.functions[name]
        raise AttributeError(name)

    def at(self, name, points):
        return self.closed_forms[name](points)

    def verify(self):
        """Grid check of 0 <= psi <= 1 and support-in-plateau nesting."""
        report = {}
        for name in CUTOFF_NAMES:
            v = self.functions[name].values
            report["range:" + name] = bool(np.all((v >= 0.0) & (v <= 1.0)))
        for prev, nxt in zip(CUTOFF_NAMES, CUTOFF_NAMES[1:]):
            vp = self.functions[prev].values
            vn = self.functions[nxt].values
            report["nest:%s<%s" % (prev, nxt)] = bool(np.all(vn[vp > 0.0] == 1.0))
        return report


class WindowSigma:
    """Nonnegative tensor window, identically 1 on [-1.2a, 1.2a] per axis.

    The plateau profile has exact mass 2.7a per axis (the quintic ramp
    integrates to half its width), so the frozen-coordinate factors of
    the anisotropic averages are exact constants.
    """

    def __init__(self, a):
        self.a = float(a)
        self.radius = 1.5 * self.a
        self.ramp = 0.3 * self.a
        self.mass0 = 2.7 * self.a
        self._quad_mass = {}

    def profile(self, t):
        return smoothstep((self.radius - np.abs(t)) / self.ramp)

    def __call__(self, points):
        points = np.atleast_2d(points)
        out = np.ones(points.shape[0])
        for k in range(points.shape[1]):
            out *= self.profile(points[:, k])
        return out

    def quadrature(self, dims, nodes_per_axis):
        return tensor_quadrature(nodes_per_axis, [self.radius] * dims)

    def quad_mass(self, nodes_per_axis):
        """Discrete per-axis mass at the given node count.

        Frozen-coordinate factors use this instead of the analytic
        mass so they agree with the active-coordinate quadrature to
        the last bit; the alternating-sum cancellations downstream
        are then exact rather than quadrature-limited.
        """
        if nodes_per_axis not in self._quad_mass:
            nodes, w = tensor_quadrature(nodes_per_axis, [self.radius])
            self._quad_mass[nodes_per_axis] = float(np.dot(w, self.profile(nodes[:, 0])))
        return self._quad_mass[nodes_per_axis]


class LinearOperatorHandle:
    """apply/adjoint closure pair over a fixed grid."""

    def __init__(self, grid, apply_raw, adjoint_raw=None, label=""):
        self.grid = grid
        self._apply = apply_raw
        self._adjoint = adjoint_raw
        self.label = label

    def __call__(self, values):
        return self._apply(np.asarray(values, dtype=float))

    def apply(self, gf):
        if not gf.grid.same_as(self.grid):
            raise DimensionMismatchError("grid mismatch in operator application")
        return GridFunction(self.grid, self(gf.values))

    @property
    def has_adjoint(self):
        return self._adjoint is not None

    @property
    def T(self):
        if self._adjoint is None:
            raise UnsupportedInputError("no adjoint recorded for %s" % self.label)
        return LinearOperatorHandle(self.grid, self._adjoint, self._apply, label=self.label + "*")

    def __matmul__(self, other):
        adjoint = None
        if self._adjoint is not None and other._adjoint is not None:
            adjoint = lambda v: other._adjoint(self._adjoint(v))
        return LinearOperatorHandle(
            self.grid,
            lambda v: self._apply(other._apply(v)),
            adjoint,
            label="(%s)(%s)" % (self.label, other.label),
        )

    def __add__(self, other):
        adjoint = None
        if self._adjoint is not None and other._adjoint is not None:
            adjoint = lambda v: self._adjoint(v) + other._adjoint(v)
        return LinearOperatorHandle(
            self.grid,
            lambda v: self._apply(v) + other._apply(v),
            adjoint,
            label="%s+%s" % (self.label, other.label),
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, factor):
        factor = float(factor)
        adjoint = None if self._adjoint is None else (lambda v: factor * self._adjoint(v))
        return LinearOperatorHandle(
            self.grid, lambda v: factor * self._apply(v), adjoint, label=self.label
        )

    @classmethod
    def from_matrix(cls, grid, mat, label=""):
        mat = sparse.csr_matrix(mat)
        matT = mat.T.tocsr()
        return cls(grid, lambda v: mat @ v, lambda v: matT @ v, label=label)

    @classmethod
    def multiplication(cls, grid, values, label=""):
        values = np.asarray(values, dtype=float).ravel()
        fn = lambda v: values * v
        return cls(grid, fn, fn, label=label or "mult")

    @classmethod
    def zero(cls, grid, label="0"):
        fn = lambda v: np.zeros_like(v)
        return cls(grid, fn, fn, label=label)

    @classmethod
    def identity(cls, grid, label="id"):
        fn = lambda v: v.copy()
        return cls(grid, fn, fn, label=label)

    def to_dense(self, max_size=40000):
        if self.grid.size > max_size:
            raise UnsupportedInputError("dense assembly capped at %d points" % max_size)
        cols = [self(col) for col in np.eye(self.grid.size)]
        return np.stack(cols, axis=1)


def linearity_probe(handle, rng, trials=10, rtol=1e-10):
    """Largest relative linearity defect over random pairs."""
    worst = 0.0
    for _ in range(trials):
        f = rng.standard_normal(handle.grid.size)
        g = rng.standard_normal(handle.grid.size)
        a, b = rng.standard_normal(2)
        lhs = handle(a * f + b * g)
        rhs = a * handle(f) + b * handle(g)
        scale = max(1e-300, float(np.max(np.abs(rhs))))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


def adjoint_probe(handle, rng, trials=10):
    """Largest |<Tf,g> - <f,T*g>| / (|f|_2 |g|_2) over random pairs."""
    worst = 0.0
    adj = handle.T
    for _ in range(trials):
        f = rng.standard_normal(handle.grid.size)
        g = rng.standard_normal(handle.grid.size)
        lhs = float(np.dot(handle(f), g))
        rhs = float(np.dot(f, adj(g)))
        denom = float(np.linalg.norm(f) * np.linalg.norm(g))
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


# -- windowed quadrature builders --------------------------------------------


def _coverage_check(targets, tgt_vals, inside, label):
    bad = (~inside) & (tgt_vals > COVER_TOL)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise CoverageError(
            "%s: window reaches outside the box where the cutoff is active" % label,
            point=targets[k],
            where=label,
        )


def build_windowed_operator(
    grid,
    gamma,
    scales,
    nodes,
    node_amps,
    outer_values,
    target_form,
    kappa=None,
    label="",
    assemble=None,
):
    """The generic windowed average as a handle.

    nodes: (M, q) quadrature nodes; node_amps: (M,) products of
    quadrature weight and profile value; scales: per-coordinate factors
    applied to nodes before feeding them to gamma; target_form: closed
    form of the cutoff applied at the target points; kappa: optional
    (t, points) -> values smooth factor.
    """
    pts = grid.points()
    M = nodes.shape[0]
    if assemble is None:
        assemble = grid.size * M * (1 << grid.n) <= ASSEMBLY_BUDGET

    def node_data(i):
        t = scales * nodes[i]
        targets = gamma(t, pts)
        idx, wts, inside = grid.interp_stencil(targets)
        tgt = target_form(targets)
        _coverage_check(targets, tgt, inside, label)
        amp = node_amps[i] * tgt
        if kappa is not None:
            amp = amp * kappa(t, pts)
        return idx, wts, amp

    if assemble:
        chunks = []
        rows = np.repeat(np.arange(grid.size), 1 << grid.n)
        total = sparse.csr_matrix((grid.size, grid.size))
        for i in range(M):
            idx, wts, amp = node_data(i)
            data = (wts * amp[:, None]).ravel()
            chunks.append(sparse.csr_matrix((data, (rows, idx.ravel())), shape=(grid.size, grid.size)))
            if len(chunks) >= 32 or i == M - 1:
                total = total + sum(chunks[1:], chunks[0])
                chunks = []
        mat = sparse.diags(outer_values) @ total
        return LinearOperatorHandle.from_matrix(grid, mat, label=label)

    def forward(v):
        acc = np.zeros(grid.size)
        for i in range(M):
            idx, wts, amp = node_data(i)
            acc += amp * np.sum(v[idx] * wts, axis=1)
        return outer_values * acc

    def adjoint(v):
        vv = outer_values * v
        acc = np.zeros(grid.size)
        for i in range(M):
            idx, wts, amp = node_data(i)
            contrib = (amp * vv)[:, None] * wts
            acc += np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=grid.size)
        return acc

    return LinearOperatorHandle(grid, forward, adjoint, label=label)


def make_phi_j(phi, j, degrees=None):
    """phi for j = 0, else phi^(2) - phi (single-parameter dilation)."""
    if abs(phi.integral() - 1.0) > 1e-12:
        raise UnsupportedInputError("base profile needs unit integral")
    if j == 0:
        return phi
    if degrees is None:
        degrees = [1] * phi.dimension
    factors = [2.0 ** float(d) for d in degrees]
    return (phi.dilated(factors) - phi).simplify()


def build_gamma_hat(specs, config=None, label=""):
    """gamma_hat_t(x) = time-one flow of the constant field sum t_k X_k."""
    if not specs:
        raise UnsupportedInputError("need at least one field for the flow family")
    config = config or FlowConfig()
    n = specs[0].dimension

    def evaluator(t, x):
        return flow_combo(specs, np.asarray(t, dtype=float), x, 1.0, config)

    return GammaSpec(len(specs), n, evaluator, label=label or "exp-flow")


def jE_index(E, j, mu0):
    """Anisotropic index: j on E, infinity off E, chained beyond mu0.

    Components are 0-based; mu0 keeps its 1-based meaning as the class
    parameter (chain condition applies to components mu0-1 .. nu-1).
    """
    E = set(E)
    out = []
    for m in range(len(j)):
        if m in E:
            out.append(j[m])
        elif m + 1 <= mu0:
            out.append(INF)
        else:
            out.append(min(INF, out[m - 1]))
    return tuple(out)


class OperatorFactory:
    """Builds and caches every block operator of one experiment scenario."""

    def __init__(
        self,
        grid,
        chain,
        weighted_fields,
        e,
        gamma=None,
        a=0.5,
        t_nodes=DEFAULT_T_NODES,
        sigma=None,
        flow_config=None,
        grouping="pure",
    ):
        self.grid = grid
        self.chain = chain
        self.fields = list(weighted_fields)
        self.e = e
        self.gamma = gamma
        self.a = float(a)
        self.t_nodes = int(t_nodes)
        self.sigma = sigma or WindowSigma(a)
        self.flow_config = flow_config or FlowConfig()
        if grouping not in ("pure", "flag"):
            raise UnsupportedInputError("grouping must be pure or flag")
        self.grouping = grouping
        self.nu = e.nu
        self._gamma_hat = {}
        self._S = {}
        self._D = {}
        self._A = {}
        self._M = {}

    # -- field grouping ------------------------------------------------------

    def X_sublist(self, mu):
        """Fields driving the single-parameter block of component mu (0-based).

        pure: degree nonzero exactly at mu. flag: degree nonzero at mu
        and zero at all earlier components.
        """
        out = []
        for wf in self.fields:
            comps = wf.degree.components
            if comps[mu] == 0:
                continue
            if self.grouping == "pure":
                if all(c == 0 for i, c in enumerate(comps) if i != mu):
                    out.append(wf)
            else:
                if all(comps[i] == 0 for i in range(mu)):
                    out.append(wf)
        if not out:
            raise UnsupportedInputError("no fields attached to parameter component %d" % mu)
        return out

    def block_degrees(self, mu):
        return [float(wf.degree.components[mu]) for wf in self.X_sublist(mu)]

    def gamma_hat(self, mu):
        if mu not in self._gamma_hat:
            specs = [wf.field for wf in self.X_sublist(mu)]
            self._gamma_hat[mu] = build_gamma_hat(specs, self.flow_config, label="block%d" % mu)
        return self._gamma_hat[mu]

    def phi_mu(self, mu):
        q = len(self.X_sublist(mu))
        return make_bump("poly4", q, self.a)

    # -- difference blocks ---------------------------------------------------

    def S_handle(self, mu, j):
        """Windowed average of f along the block flow at scale 2^-j."""
        if j < 0:
            return LinearOperatorHandle.zero(self.grid)
        key = (mu, j)
        if key not in self._S:
            degrees = self.block_degrees(mu)
            scales = np.array([2.0 ** (-j * d) for d in degrees])
            phi = self.phi_mu(mu)
            nodes, w = tensor_quadrature(self.t_nodes, [phi.axis_radius(k) for k in range(phi.dimension)])
            amps = w * phi(nodes)
            self._S[key] = build_windowed_operator(
                self.grid,
                self.gamma_hat(mu),
                scales,
                nodes,
                amps,
                self.chain.psim3.values,
                lambda p: self.chain.at("psim3", p),
                label="S[%d,%d]" % (mu, j),
            )
        return self._S[key]

    def D_handle(self, mu, j):
        """Difference block: consecutive windowed averages, D_0 = S_0."""
        key = (mu, j)
        if key not in self._D:
            if j == 0:
                self._D[key] = self.S_handle(mu, 0)
            else:
                self._D[key] = self.S_handle(mu, j) - self.S_handle(mu, j - 1)
            self._D[key].label = "D[%d,%d]" % (mu, j)
        return self._D[key]

    def D_full(self, j):
        """D_j as the composition of the per-component blocks."""
        if len(j) != self.nu:
            raise DimensionMismatchError("index has %d components, expected %d" % (len(j), self.nu))
        handle = self.D_handle(0, j[0])
        for mu in range(1, self.nu):
            handle = handle @ self.D_handle(mu, j[mu])
        handle.label = "D%s" % (tuple(j),)
        return handle

    # -- averages ------------------------------------------------------------

    def A_handle(self, mu, j):
        """Windowed nonnegative average at scale 2^-j; j = inf multiplies."""
        key = (mu, j)
        if key not in self._A:
            if j == INF:
                q = len(self.X_sublist(mu))
                factor = self.sigma.quad_mass(self.t_nodes) ** q
                psi = self.chain.psim1.values
                self._A[key] = LinearOperatorHandle.multiplication(
                    self.grid, factor * psi * psi, label="A[%d,inf]" % mu
                )
            else:
                degrees = self.block_degrees(mu)
                scales = np.array([2.0 ** (-j * d) for d in degrees])
                q = len(degrees)
                nodes, w = self.sigma.quadrature(q, self.t_nodes)
                amps = w * self.sigma(nodes)
                self._A[key] = build_windowed_operator(
                    self.grid,
                    self.gamma_hat(mu),
                    scales,
                    nodes,
                    amps,
                    self.chain.psim1.values,
                    lambda p: self.chain.at("psim1", p),
                    label="A[%d,%s]" % (mu, j),
                )
        return self._A[key]

    def A_full(self, j):
        handle = self.A_handle(0, j[0])
        for mu in range(1, self.nu):
            handle = handle @ self.A_handle(mu, j[mu])
        handle.label = "A%s" % (tuple(j),)
        return handle

    # -- anisotropic averages along the full family --------------------------

    def _require_gamma(self):
        if self.gamma is None:
            raise UnsupportedInputError("scenario has no full family map configured")
        return self.gamma

    def _m_scales(self, jE):
        """Per-coordinate factors 2^{-jE . e_k}; frozen coordinates get 0."""
        scales = np.empty(self.e.N)
        for k, row in enumerate(self.e.rows):
            s = 0.0
            frozen = False
            for mu, c in enumerate(row.components):
                if c == 0:
                    continue
                if jE[mu] == INF:
                    frozen = True
                    break
                s += float(jE[mu]) * float(c)
            scales[k] = 0.0 if frozen else 2.0**-s
        return scales

    def M_handle(self, jE):
        """Average along the full family at anisotropic scale 2^-jE.

        Coordinates dilated by 2^-inf are frozen at 0; each frozen
        coordinate leaves an exact window-mass factor behind.
        """
        key = tuple(jE)
        if key not in self._M:
            gamma = self._require_gamma()
            scales = self._m_scales(jE)
            active = [k for k in range(self.e.N) if scales[k] > 0.0]
            frozen = self.e.N - len(active)
            factor = self.sigma.quad_mass(self.t_nodes) ** frozen
            psi0 = self.chain.psi0.values
            if not active:
                self._M[key] = LinearOperatorHandle.multiplication(
                    self.grid, factor * psi0 * psi0, label="M[empty]"
                )
            else:
                nodes_a, w = self.sigma.quadrature(len(active), self.t_nodes)
                nodes = np.zeros((nodes_a.shape[0], self.e.N))
                nodes[:, active] = nodes_a
                amps = factor * w * self.sigma(nodes_a)
                self._M[key] = build_windowed_operator(
                    self.grid,
                    gamma,
                    scales,
                    nodes,
                    amps,
                    psi0,
                    lambda p: self.chain.at("psi0", p),
                    label="M%s" % (key,),
                )
        return self._M[key]

    def B_handle(self, j, mu0=None):
        """Alternating difference of coarse averages and family averages."""
        mu0 = self.nu if mu0 is None else mu0
        total = None
        for size in range(self.nu + 1):
            for E in itertools.combinations(range(self.nu), size):
                sign = -1.0 if size % 2 else 1.0
                Ec = tuple(m for m in range(self.nu) if m not in E)
                part = self.A_full(jE_index(Ec, j, mu0)) @ self.M_handle(jE_index(E, j, mu0))
                part = part.scaled(sign)
                total = part if total is None else total + part
        total.label = "B%s" % (tuple(j),)
        return total

    # -- truncated singular integral -----------------------------------------

    def T_piece(self, kernel, j, kappa=None):
        """One dyadic piece of the singular integral, on the full family."""
        gamma = self._require_gamma()
        piece = kernel.pieces[tuple(j)]
        lam = np.array(
            [
                2.0 ** sum(float(jm) * float(c) for jm, c in zip(j, row.components))
                for row in kernel.e.rows
            ]
        )
        scales = 1.0 / lam
        radii = [piece.axis_radius(k) for k in range(piece.dimension)]
        nodes, w = tensor_quadrature(self.t_nodes, radii)
        amps = w * piece(nodes)
        return build_windowed_operator(
            self.grid,
            gamma,
            scales,
            nodes,
            amps,
            self.chain.psi1.values,
            lambda p: self.chain.at("psi2", p),
            kappa=kappa,
            label="T%s" % (tuple(j),),
        )

    def T_full(self, kernel, kappa=None):
        total = None
        for j in kernel.indices:
            part = self.T_piece(kernel, j, kappa)
            total = part if total is None else total + part
        total.label = "T[J=%d]" % kernel.J
        return total

    # -- maximal function ----------------------------------------------------

    def maximal(self, f, delta_grid, ball="l2"):
        """Pointwise sup over delta of windowed averages of |f|.

        Integration runs over the t-ball of radius a (l2 or box),
        dilated per delta through the exponent matrix; nonlinear, so
        the result is a GridFunction, not a handle.
        """
        gamma = self._require_gamma()
        nodes, w = tensor_quadrature(self.t_nodes, [self.a] * self.e.N)
        if ball == "l2":
            mask = np.linalg.norm(nodes, axis=1) < self.a
        else:
            mask = np.ones(nodes.shape[0], dtype=bool)
        nodes, w = nodes[mask], w[mask]
        pts = self.grid.points()
        psi1 = self.chain.psi1.values
        absf = GridFunction(self.grid, np.abs(f.values))
        best = np.zeros(self.grid.size)
        for delta in delta_grid:
            factors = np.array([delta_power(delta, row) for row in self.e.rows])
            acc = np.zeros(self.grid.size)
            for i in range(nodes.shape[0]):
                targets = gamma(factors * nodes[i], pts)
                vals, inside = absf.sample(targets)
                tgt = self.chain.at("psi2", targets)
                _coverage_check(targets, tgt, inside, "maximal")
                acc += w[i] * vals * tgt
            np.maximum(best, psi1 * acc, out=best)
        return GridFunction(self.grid, best)


def default_delta_grid(e, J, mu0=1):
    """Finite dyadic-plus-midpoint scale set inside the class region."""
    base = []
    for k in range(J + 1):
        base.append(2.0**-k)
        base.append(3.0 * 2.0 ** -(k + 2))
    base = sorted(set(base), reverse=True)
    out = []
    for combo in itertools.product(base, repeat=e.nu):
        # delta = 2^-j with the chain j_{mu0} >= ... >= j_nu flips to <=
        ok = all(combo[m - 1] <= combo[m] for m in range(mu0, e.nu))
        if ok:
            out.append(combo)
    return out


def schwartz_kernel(handle, probe_indices):
    """Columns of the operator's kernel matrix via scaled delta probes."""
    h_n = handle.grid.cell_volume()
    cols = []
    for flat in probe_indices:
        probe = np.zeros(handle.grid.size)
        probe[flat] = 1.0 / h_n
        cols.append(handle(probe))
    return np.stack(cols, axis=1)


def kernel_mass_outside(columns, probe_indices, grid, predicate):
    """Worst fraction of kernel column mass outside a membership predicate.

    predicate(center_point, points) -> bool mask of points considered
    inside. Mass is the l1 sum of |column| values.
    """
    pts = grid.points()
    worst = 0.0
    for col, flat in zip(columns.T, probe_indices):
        inside = predicate(pts[flat], pts)
        total = float(np.sum(np.abs(col)))
        if total == 0.0:
            continue
        outside = float(np.sum(np.abs(col[~inside])))
        worst = max(worst, outside / total)
    return worst
