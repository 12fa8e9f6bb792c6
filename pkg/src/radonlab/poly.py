"""Sparse multivariate polynomials over float coefficients.

A polynomial in n variables is a dict mapping exponent tuples to
coefficients, e.g. {(0, 1, 0): -2.0} is -2*x2. This is all the symbolic
machinery exact vector-field brackets need: evaluate, differentiate,
multiply, add. Serialization is one polynomial per line, terms separated
by spaces, each term ``coef:e1,e2,...,en``.
"""

import numpy as np

_TOL = 0.0  # coefficients are kept exactly; zeros are dropped when equal to 0.0


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        self.terms = {}
        if terms:
            for exps, coef in terms.items():
                self._add_term(tuple(int(e) for e in exps), float(coef))

    def _add_term(self, exps, coef):
        if len(exps) != self.nvars:
            raise ValueError("exponent tuple length %d != nvars %d" % (len(exps), self.nvars))
        new = self.terms.get(exps, 0.0) + coef
        if new == _TOL:
            self.terms.pop(exps, None)
        else:
            self.terms[exps] = new

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    @classmethod
    def constant(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, index):
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1.0})

    def __add__(self, other):
        other = self._coerce(other)
        out = Poly(self.nvars, self.terms)
        for exps, coef in other.terms.items():
            out._add_term(exps, coef)
        return out

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly(self.nvars, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        out = Poly.zero(self.nvars)
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                out._add_term(tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
        return out

    __rmul__ = __mul__

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("mixed variable counts")
            return other
        return Poly.constant(self.nvars, float(other))

    def diff(self, var):
        out = Poly.zero(self.nvars)
        for exps, coef in self.terms.items():
            k = exps[var]
            if k == 0:
                continue
            lowered = list(exps)
            lowered[var] = k - 1
            out._add_term(tuple(lowered), coef * k)
        return out

    def __call__(self, points):
        """Evaluate at points of shape (..., nvars); returns shape (...)."""
        points = np.asarray(points, dtype=float)
        scalar_in = points.ndim == 1
        pts = points[None, :] if scalar_in else points
        out = np.zeros(pts.shape[:-1])
        for exps, coef in self.terms.items():
            term = np.full(pts.shape[:-1], coef)
            for var, k in enumerate(exps):
                if k:
                    term = term * pts[..., var] ** k
            out += term
        return out[0] if scalar_in else out

    def is_zero(self):
        return not self.terms

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        return "Poly(%d, %r)" % (self.nvars, self.terms)

    # -- plain-text form: "coef:e1,e2,...  coef:e1,e2,..." ------------------

    def dumps(self):
        if not self.terms:
            return "0:" + ",".join("0" * 1 for _ in range(self.nvars)) if False else ""
        parts = []
        for exps in sorted(self.terms):
            coef = self.terms[exps]
            parts.append("%.17g:%s" % (coef, ",".join(str(e) for e in exps)))
        return " ".join(parts)

    @classmethod
    def loads(cls, line, nvars):
        line = line.strip()
        out = cls.zero(nvars)
        if not line:
            return out
        for part in line.split():
            coef_s, _, exps_s = part.partition(":")
            exps = tuple(int(e) for e in exps_s.split(",")) if exps_s else (0,) * nvars
            out._add_term(exps, float(coef_s))
        return out
