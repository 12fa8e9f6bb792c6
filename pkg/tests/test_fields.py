"""Formal degrees, dilations, vector fields, brackets, and families.

The bracket tests compare the package's polynomial commutator against
an independent symbolic computation in sympy, so the two routes share
no code.
"""

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from radonlab.errors import (
    DimensionMismatchError,
    GrowthError,
    InversionError,
    UnsupportedInputError,
)
from radonlab.fields import (
    DilationExponents,
    FormalDegree,
    GammaSpec,
    VectorFieldSpec,
    WeightedField,
    check_commutator_certificate,
    commutator,
    compute_W,
    delta_power,
    dilate_param,
    dump_field,
    dump_weighted_list,
    generate_finite_list,
    load_field,
    load_weighted_list,
    pure_power_fields,
    scale_fields,
    taylor_fields,
)
from radonlab.poly import Poly
from radonlab.util import rng_for, sobol_points


# -- degrees and dilations ---------------------------------------------------


def test_formal_degree_exact_rationals():
    d = FormalDegree((Fraction(1, 3), 2))
    assert d.components == (Fraction(1, 3), Fraction(2))
    assert d.nu == 2
    assert np.allclose(d.as_array(), [1.0 / 3.0, 2.0])
    total = d + FormalDegree((Fraction(2, 3), 0.5))
    assert total.components == (Fraction(1), Fraction(5, 2))


def test_formal_degree_rejects_bad_input():
    with pytest.raises(ValueError):
        FormalDegree((0, 0))
    with pytest.raises(ValueError):
        FormalDegree((-1, 2))


def test_formal_degree_dumps_loads():
    d = FormalDegree((Fraction(5, 7), 3))
    assert FormalDegree.loads(d.dumps()) == d


def test_delta_power_conventions():
    assert delta_power((0.5, 2.0), (1, 1)) == 1.0
    assert delta_power(0.5, (2,)) == 0.25
    # zero base with zero exponent contributes nothing, not 0
    assert delta_power((0.0, 2.0), (0, 1)) == 2.0
    assert delta_power(0.5, (1, 1)) == 0.25  # scalar broadcast over nu = 2
    with pytest.raises(DimensionMismatchError):
        delta_power((0.5, 0.5, 0.5), (1, 1))


def test_dilation_exponents_structure():
    e = DilationExponents(((1, 0), (0, 1), (1, 1)))
    assert e.N == 3 and e.nu == 2
    assert np.array_equal(e.as_matrix(), [[1, 0], [0, 1], [1, 1]])
    assert e.coordinate_group(0) == [0, 2]
    assert e.coordinate_group(1) == [1, 2]
    with pytest.raises(DimensionMismatchError):
        DilationExponents(((1, 0), (1,)))


def test_dilate_param():
    e = DilationExponents(((1, 0), (0, 1), (1, 1)))
    t = np.array([1.0, 1.0, 1.0])
    out = dilate_param((0.5, 0.25), e, t)
    assert np.allclose(out, [0.5, 0.25, 0.125])


# -- vector fields -----------------------------------------------------------


def heis_polys():
    x = Poly.variable(3, 0)
    y = Poly.variable(3, 1)
    zero = Poly.zero(3)
    one = Poly.constant(3, 1.0)
    X = VectorFieldSpec.from_polys((one, zero, y * -2.0), label="X")
    Y = VectorFieldSpec.from_polys((zero, one, x * 2.0), label="Y")
    return X, Y


def test_field_evaluation_and_scaling():
    X, _ = heis_polys()
    pts = np.array([[0.0, 1.0, 0.0], [2.0, -3.0, 1.0]])
    assert np.allclose(X(pts), [[1.0, 0.0, -2.0], [1.0, 0.0, 6.0]])
    half = X.scaled(0.5)
    assert half.symbolic
    assert np.allclose(half(pts), 0.5 * X(pts))
    assert not X.is_zero()
    assert VectorFieldSpec.from_polys([Poly.zero(1)]).is_zero()


def test_from_callable_checks_symbolic_agreement():
    p = Poly.variable(1, 0)
    VectorFieldSpec.from_callable(1, lambda x: x, polys=(p,))
    with pytest.raises(UnsupportedInputError):
        VectorFieldSpec.from_callable(1, lambda x: 2.0 * x, polys=(p,))


def test_scale_fields_applies_delta_powers():
    X, Y = heis_polys()
    wfs = [WeightedField(X, (1, 0)), WeightedField(Y, (0, 2))]
    scaled = scale_fields((0.5, 0.5), wfs)
    pts = sobol_points(4, 3, 1.0)
    assert np.allclose(scaled[0](pts), 0.5 * X(pts))
    assert np.allclose(scaled[1](pts), 0.25 * Y(pts))


# -- brackets against a sympy oracle -----------------------------------------


def sympy_bracket(Xc, Yc, symbols):
    out = []
    for i in range(len(symbols)):
        acc = sp.S.Zero
        for k, s in enumerate(symbols):
            acc += Xc[k] * sp.diff(Yc[i], s) - Yc[k] * sp.diff(Xc[i], s)
        out.append(sp.expand(acc))
    return out


def test_commutator_matches_sympy_on_quadratic_fields():
    x, y = sp.symbols("x y")
    Xc = [x**2 + 1, x * y]
    Yc = [y, x + y**2]
    oracle = sp.lambdify((x, y), sympy_bracket(Xc, Yc, (x, y)), "numpy")

    px = Poly.variable(2, 0)
    py = Poly.variable(2, 1)
    X = VectorFieldSpec.from_polys((px * px + 1.0, px * py))
    Y = VectorFieldSpec.from_polys((py, px + py * py))
    br = commutator(X, Y)
    assert br.symbolic
    pts = sobol_points(16, 2, 2.0)
    expected = np.stack(oracle(pts[:, 0], pts[:, 1]), axis=-1)
    assert np.allclose(br(pts), expected, atol=1e-12)


def test_commutator_heisenberg_value():
    X, Y = heis_polys()
    br = commutator(X, Y)
    pts = sobol_points(8, 3, 2.0)
    assert np.allclose(br(pts), np.broadcast_to([0.0, 0.0, 4.0], (8, 3)), atol=1e-12)


def test_commutator_numeric_route_agrees_with_symbolic():
    X, Y = heis_polys()
    # strip the polynomial forms to force the finite-difference path
    Xn = VectorFieldSpec(3, X.evaluator)
    Yn = VectorFieldSpec(3, Y.evaluator)
    br = commutator(Xn, Yn)
    assert not br.symbolic
    pts = sobol_points(8, 3, 1.0)
    assert np.allclose(br(pts), np.broadcast_to([0.0, 0.0, 4.0], (8, 3)), atol=1e-6)


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        commutator(
            VectorFieldSpec.from_polys([Poly.zero(1)]),
            VectorFieldSpec.from_polys([Poly.zero(2), Poly.zero(2)]),
        )


# -- bracket closure ---------------------------------------------------------


def test_generate_finite_list_closes_heisenberg():
    X, Y = heis_polys()
    seeds = [WeightedField(X, (1, 0, 0)), WeightedField(Y, (0, 1, 0))]
    out = generate_finite_list(seeds, (1, 1, 1))
    assert len(out) == 3
    third = out[2]
    assert third.degree == FormalDegree((1, 1, 0))
    pts = sobol_points(8, 3, 1.0)
    assert np.allclose(third.field(pts), np.broadcast_to([0.0, 0.0, 4.0], (8, 3)))


def test_generate_finite_list_growth_error():
    # x^2 d/dx and x^3 d/dx bracket to ever higher powers of x
    x = Poly.variable(1, 0)
    f = VectorFieldSpec.from_polys((x * x,))
    g = VectorFieldSpec.from_polys((x * x * x,))
    seeds = [WeightedField(f, (1,)), WeightedField(g, (1,))]
    with pytest.raises(GrowthError):
        generate_finite_list(seeds, (1000,), max_fields=12)


# -- gamma families ----------------------------------------------------------


def translation_gamma(n=2):
    def evaluator(t, x):
        out = np.array(x, dtype=float, copy=True)
        out[..., : t.shape[0]] += t
        return out

    return GammaSpec(n, n, evaluator, label="translation")


def test_gamma_identity_and_inverse():
    gamma = translation_gamma()
    assert gamma.check_identity_at_zero()
    t = np.array([0.3, -0.2])
    x = sobol_points(8, 2, 1.0)
    z = gamma.inverse(t, x)
    assert np.allclose(gamma(t, z), x, atol=1e-10)


def test_gamma_shape_validation():
    gamma = translation_gamma()
    with pytest.raises(DimensionMismatchError):
        gamma(np.zeros(3), np.zeros((4, 2)))


def test_compute_W_translation():
    # deformation field of a translation family is the parameter itself
    gamma = translation_gamma()
    t = np.array([0.25, -0.4])
    x = sobol_points(8, 2, 1.0)
    W = compute_W(gamma, t, x)
    assert np.allclose(W, np.broadcast_to(t, x.shape), atol=1e-8)
    assert np.array_equal(compute_W(gamma, np.zeros(2), x), np.zeros_like(x))


def test_taylor_fields_translation():
    gamma = translation_gamma()
    e = DilationExponents(((1, 0), (0, 1)))
    out = taylor_fields(gamma, e, order=1)
    assert len(out) == 2
    x = sobol_points(4, 2, 0.5)
    for alpha, spec, deg in out:
        expected = np.zeros((4, 2))
        expected[:, alpha.index(1)] = 1.0
        assert np.allclose(spec(x), expected, atol=1e-6)
        assert deg == tuple(e.rows[alpha.index(1)].components)


def test_pure_power_filter():
    keep = ((1, 0), None, (Fraction(2), Fraction(0)))
    drop = ((1, 1), None, (Fraction(1), Fraction(1)))
    out = pure_power_fields([keep, drop])
    assert out == [keep]


def test_commutator_certificate_heisenberg():
    X, Y = heis_polys()
    T = VectorFieldSpec.from_polys((Poly.zero(3), Poly.zero(3), Poly.constant(3, 1.0)))
    fields = [
        WeightedField(X, (1, 0, 0)),
        WeightedField(Y, (0, 1, 0)),
        WeightedField(T, (0, 0, 1)),
    ]
    samples = sobol_points(8, 3, 1.0)
    res, coef = check_commutator_certificate(fields, (0.5, 0.5, 0.25), samples)
    # bracket closure is exact here, so only lstsq round-off remains
    assert res <= 1e-10
    # [dX, dY] = 4 d1 d2 T needs coefficient 4 d1 d2 / d3
    assert coef <= 4.0 * 0.5 * 0.5 / 0.25 + 1e-6


# -- serialization -----------------------------------------------------------


def test_field_dump_load_roundtrip():
    X, _ = heis_polys()
    text = dump_field(X)
    back = load_field(text, 3)
    pts = sobol_points(8, 3, 2.0)
    assert np.allclose(back(pts), X(pts))


def test_weighted_list_roundtrip():
    X, Y = heis_polys()
    fields = [WeightedField(X, (1, 0)), WeightedField(Y, (Fraction(1, 2), 1))]
    text = dump_weighted_list(fields)
    back = load_weighted_list(text)
    assert len(back) == 2
    assert back[1].degree == FormalDegree((Fraction(1, 2), 1))
    pts = sobol_points(4, 3, 1.0)
    for orig, loaded in zip(fields, back):
        assert np.allclose(loaded.field(pts), orig.field(pts))
