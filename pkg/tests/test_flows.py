"""Flow integration, exponential charts, and reachable-set volumes.

The RK4 integrator is checked against closed-form flows (scalar
exponential growth, the three-field group frame) so the integration
and geometry layers validate each other through independent routes.
"""

import math

import numpy as np
import pytest

from radonlab.errors import DegeneratePointError, DimensionMismatchError
from radonlab.fields import VectorFieldSpec, WeightedField
from radonlab.flows import (
    BallEstimate,
    ExpChart,
    FlowConfig,
    ball_estimates_csv,
    ball_membership,
    ball_volume,
    bins_for,
    cc_distance,
    doubling_ratio,
    flow_combo,
    flow_piecewise,
    frame_gram_volume,
    occupancy_volume,
    pullback_fields,
    rk4,
    sample_endpoints,
    select_frame,
    unit_ball_volume,
)
from radonlab.heisenberg import heis_fields, heis_flow
from radonlab.poly import Poly
from radonlab.util import rng_for


def euclidean_fields(n=2):
    out = []
    for k in range(n):
        polys = [Poly.constant(n, 1.0 if i == k else 0.0) for i in range(n)]
        spec = VectorFieldSpec.from_polys(polys, label="d/dx%d" % k)
        out.append(WeightedField(spec, tuple(1 if i == k else 0 for i in range(n))))
    return out


def test_rk4_scalar_exponential():
    # dx/ds = x integrates to e * x0 over unit time
    end = rk4(lambda x: x, np.array([[1.0], [2.0]]), time=1.0, nsteps=64)
    assert np.allclose(end[:, 0], [math.e, 2.0 * math.e], rtol=1e-8)


def test_flow_combo_matches_heisenberg_closed_form():
    fields = [wf.field for wf in heis_fields(strong=True)]
    rng = rng_for(0, 21)
    x0 = rng.uniform(-1.0, 1.0, size=(16, 3))
    coeffs = np.broadcast_to([0.3, -0.5, 0.2], (16, 3))
    numeric = flow_combo(fields, coeffs, x0.copy(), config=FlowConfig(64))
    exact = heis_flow((0.3, -0.5, 0.2), x0)
    assert np.allclose(numeric, exact, atol=1e-9)


def test_flow_piecewise_concatenates():
    fields = [wf.field for wf in euclidean_fields(2)]
    # two pieces pushing along x then y, each for time 1/2
    pieces = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    end = flow_piecewise(fields, pieces, np.zeros(2))
    assert np.allclose(end, [[0.5, 0.5]], atol=1e-12)


def test_flow_piecewise_validates_width():
    fields = [wf.field for wf in euclidean_fields(2)]
    with pytest.raises(DimensionMismatchError):
        flow_piecewise(fields, np.zeros((1, 2, 3)), np.zeros(2))


def test_select_frame_euclidean():
    fields = euclidean_fields(2)
    indices, rank, sv = select_frame(fields, (1.0, 1.0), np.zeros(2))
    assert rank == 2
    assert tuple(indices) == (0, 1)
    assert np.allclose(sorted(sv), [1.0, 1.0])


def test_select_frame_degenerate_point():
    zero = VectorFieldSpec.from_polys([Poly.zero(1)])
    with pytest.raises(DegeneratePointError):
        select_frame([WeightedField(zero, (1,))], (1.0,), np.zeros(1))


def test_select_frame_prefers_larger_gram_volume():
    # second field dominates: frame picks it over the small first field
    big = VectorFieldSpec.from_polys([Poly.constant(1, 3.0)])
    small = VectorFieldSpec.from_polys([Poly.constant(1, 0.1)])
    fields = [WeightedField(small, (1,)), WeightedField(big, (1,))]
    indices, rank, _ = select_frame(fields, (1.0,), np.zeros(1))
    assert rank == 1 and tuple(indices) == (1,)


def test_frame_gram_volume_orthonormal():
    fields = euclidean_fields(2)
    assert abs(frame_gram_volume(fields, (1.0, 1.0), np.zeros(2), (0, 1)) - 1.0) < 1e-12
    assert abs(frame_gram_volume(fields, (0.5, 0.5), np.zeros(2), (0, 1)) - 0.25) < 1e-12


def test_exp_chart_translation_is_linear():
    fields = euclidean_fields(2)
    chart = ExpChart(fields, (0.5, 0.25), np.array([1.0, -1.0]))
    assert chart.rank == 2
    u = np.array([0.4, -0.8])
    assert np.allclose(chart(u), [1.0 + 0.2, -1.0 - 0.2], atol=1e-10)
    grid = np.stack(np.meshgrid(*([np.linspace(-1, 1, 5)] * 2), indexing="ij"), axis=-1)
    ratios = chart.jacobian_det_ratio(grid.reshape(-1, 2))
    assert np.allclose(ratios, 1.0, atol=1e-6)


def test_exp_chart_batched_call_shape():
    fields = euclidean_fields(2)
    chart = ExpChart(fields, (1.0, 1.0), np.zeros(2))
    u = np.zeros((3, 4, 2))
    assert chart(u).shape == (3, 4, 2)


def test_pullback_fields_translation():
    # in chart coordinates the frame becomes the coordinate fields
    fields = euclidean_fields(2)
    chart = ExpChart(fields, (0.5, 0.5), np.zeros(2))
    pulled = pullback_fields(chart, chart.frame)
    u = np.array([[0.2, -0.3], [0.0, 0.5]])
    for k, spec in enumerate(pulled):
        expected = np.zeros((2, 2))
        expected[:, k] = 1.0
        assert np.allclose(spec(u), expected, atol=1e-5)


def test_sample_endpoints_shape_and_determinism():
    fields = euclidean_fields(2)
    pts = sample_endpoints(fields, (1.0, 1.0), np.zeros(2), 200, seed=3)
    assert pts.shape == (200, 2)
    again = sample_endpoints(fields, (1.0, 1.0), np.zeros(2), 200, seed=3)
    assert np.array_equal(pts, again)
    # all endpoints stay inside the closed unit ball reachable set
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.0 + 1e-8)


def test_occupancy_volume_unit_square():
    # hull cells carry weight 1/2, so a filled unit square reads as
    # 1 - (boundary cells)/(2 * cells); the bias cancels for clouds
    # whose boundary band is genuinely half-covered
    rng = rng_for(0, 33)
    nbins = 20
    pts = rng.uniform(0.0, 1.0, size=(20000, 2))
    vol = occupancy_volume(pts, nbins)
    boundary = 4 * nbins - 4
    expected = 1.0 - boundary / (2.0 * nbins**2)
    assert abs(vol - expected) < 0.02


def test_occupancy_volume_degenerate_cloud():
    pts = np.zeros((100, 2))
    assert occupancy_volume(pts, 8) >= 0.0


def test_bins_for_clipping():
    assert bins_for(10, 1) == 8
    assert bins_for(10**9, 1) == 128
    assert bins_for(4000, 2) == 10


def test_unit_ball_volume_known_values():
    assert abs(unit_ball_volume(1) - 2.0) < 1e-14
    assert abs(unit_ball_volume(2) - math.pi) < 1e-14
    assert abs(unit_ball_volume(3) - 4.0 * math.pi / 3.0) < 1e-14


def test_ball_volume_euclidean_matches_prediction():
    est = ball_volume(euclidean_fields(2), (1.0, 1.0), np.zeros(2), samples=8000, seed=0)
    assert est.det_prediction == pytest.approx(math.pi, abs=1e-12)
    assert abs(est.ratio - 1.0) < 0.1
    assert est.stderr >= 0.0
    assert est.samples == 8000


def test_ball_estimates_csv_layout():
    est = BallEstimate((0.5, 0.5), 1.0, 0.01, 1.0, 100, 0)
    text = ball_estimates_csv([est], None)
    head = text.split("\n")[0].split(",")
    assert head[:2] == ["delta_1", "delta_2"]
    assert "ratio" in head
    with pytest.raises(DimensionMismatchError):
        ball_estimates_csv([est, BallEstimate((0.5,), 1.0, 0.0, 1.0, 100, 0)], None)


def test_doubling_ratio_euclidean_exact_by_seed_reuse():
    # reused control seed makes endpoints scale exactly with delta
    ratio, predicted, est1, est2 = doubling_ratio(
        euclidean_fields(2), (0.5, 0.5), np.zeros(2), samples=4000, seed=0
    )
    assert predicted == 4.0
    assert ratio == pytest.approx(4.0, rel=1e-12)
    assert est2.volume == pytest.approx(4.0 * est1.volume, rel=1e-12)


# constant fields make RK4 exact at any step count, so the membership
# tests can run the integrator at its coarsest setting


def test_ball_membership_reaches_interior_point():
    fields = euclidean_fields(2)
    dist, pieces = ball_membership(
        fields, (1.0, 1.0), np.zeros(2), np.array([0.3, 0.2]),
        npieces=2, restarts=2, config=FlowConfig(4),
    )
    assert dist < 1e-3
    assert pieces.shape[1] == 2
    assert np.all(np.linalg.norm(pieces, axis=-1) <= 1.0 + 1e-12)


def test_ball_membership_cannot_leave_reachable_set():
    fields = euclidean_fields(2)
    dist, _ = ball_membership(
        fields, (1.0, 1.0), np.zeros(2), np.array([3.0, 0.0]),
        npieces=2, restarts=1, config=FlowConfig(4),
    )
    assert dist > 1.5  # unit-ball controls cannot reach distance 3


def test_cc_distance_euclidean():
    # a single constant control reaches any straight-line target, so
    # one piece keeps the inner optimization two-dimensional
    fields = euclidean_fields(2)
    d = cc_distance(fields, np.zeros(2), np.array([0.3, 0.4]), scale_hi=2.0, iters=8, npieces=1)
    assert abs(d - 0.5) < 0.05


def test_cc_distance_unreachable():
    fields = euclidean_fields(2)
    assert cc_distance(fields, np.zeros(2), np.array([50.0, 0.0]), scale_hi=2.0, npieces=1) == math.inf
