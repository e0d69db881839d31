import numpy as np
import pytest

from app.core.estimation import estimate_uncertainty, ls_optimality_check
from app.core.projection import skr_forward
from app.errors import NotNormalized
from app.models.signals import SignalWindow
from tests.helpers import add_to_outputs, gaussian_taper, plant_data, sinusoid_input

DT = 0.01
M = 4001


def _tapered_fault(bundle, amplitude=0.5):
    data = plant_data(bundle, sinusoid_input(M, DT), DT)
    return add_to_outputs(data, amplitude * gaussian_taper(M, DT))


def test_nominal_data_gives_zero_estimate(lti_bundle, lti_pair):
    _, skr = lti_pair
    estimate = estimate_uncertainty(skr, plant_data(lti_bundle, sinusoid_input(M, DT), DT))
    assert estimate.consistency_defect < 1e-8
    assert np.max(np.abs(estimate.zdelta)) < 1e-8


@pytest.mark.parametrize("bundle_name, pair_name, tolerance", [
    ("lti_bundle", "lti_pair", 1e-4),
    ("cubic_bundle", "cubic_pair", 1e-3),
])
def test_replayed_estimate_reproduces_residual(bundle_name, pair_name, tolerance, request):
    bundle = request.getfixturevalue(bundle_name)
    _, skr = request.getfixturevalue(pair_name)
    estimate = estimate_uncertainty(skr, _tapered_fault(bundle))
    scale = np.max(np.linalg.norm(estimate.residual_r, axis=1))
    assert scale > 1e-2
    assert estimate.consistency_defect / scale < tolerance
    assert estimate.du.shape == (M, 1) and estimate.dy.shape == (M, 1)


def test_estimate_is_linear_for_lti(lti_pair):
    _, skr = lti_pair
    bump = gaussian_taper(M, DT)
    single = estimate_uncertainty(skr, SignalWindow(t0=0.0, dt=DT, u=np.zeros(M), y=0.5 * bump))
    double = estimate_uncertainty(skr, SignalWindow(t0=0.0, dt=DT, u=np.zeros(M), y=bump))
    assert np.allclose(double.zdelta, 2.0 * single.zdelta, atol=1e-12)


@pytest.mark.parametrize("bundle_name", ["lti_bundle", "cubic_bundle"])
def test_reference_gain_minimizes_estimation_cost(bundle_name, request):
    bundle = request.getfixturevalue(bundle_name)
    window = _tapered_fault(bundle)
    report = ls_optimality_check(
        bundle.system, bundle.skr_storage, bundle.skr_gain, [0.8, 0.9, 1.1, 1.2], window,
    )
    assert report.passed
    assert report.skipped == []
    assert set(report.costs) == {"1", "0.8", "0.9", "1.1", "1.2"}
    assert all(report.costs[key] >= report.reference_cost for key in report.costs)
    assert report.costs["0.8"] > report.costs["0.9"]
    assert report.costs["1.2"] > report.costs["1.1"]


def test_reference_cost_is_half_estimate_energy(lti_bundle, lti_pair):
    _, skr = lti_pair
    window = _tapered_fault(lti_bundle)
    report = ls_optimality_check(lti_bundle.system, lti_bundle.skr_storage, lti_bundle.skr_gain, [1.1], window)
    estimate = estimate_uncertainty(skr, window)
    assert report.reference_cost == pytest.approx(0.5 * np.sum(estimate.zdelta ** 2) * DT, rel=1e-6)


@pytest.mark.parametrize("bundle_name, pair_name", [("lti_bundle", "lti_pair"), ("cubic_bundle", "cubic_pair")])
def test_cost_excess_is_quadratic_in_the_gain_scaling(bundle_name, pair_name, request):
    bundle = request.getfixturevalue(bundle_name)
    _, skr = request.getfixturevalue(pair_name)
    window = _tapered_fault(bundle)
    report = ls_optimality_check(bundle.system, bundle.skr_storage, bundle.skr_gain, [0.8, 1.2], window)
    _, states = skr_forward(skr, window)
    # c(x) = x on both scalar plants
    output_energy = float(np.sum(states ** 2)) * DT
    for s in (0.8, 1.2):
        excess = report.costs[f"{s:g}"] - report.reference_cost
        assert excess == pytest.approx(0.5 * (s - 1.0) ** 2 * output_energy, rel=1e-6)


def test_least_squares_check_needs_storage(lti_bundle):
    window = _tapered_fault(lti_bundle)
    with pytest.raises(NotNormalized):
        ls_optimality_check(lti_bundle.system, None, lti_bundle.skr_gain, [1.1], window)
