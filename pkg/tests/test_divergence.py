import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from app.core.divergence import (
    bregman, certify_convexity, decide, dual_bregman, evaluate_J_sir, legendre_form, minimality_check,
    negative_entropy, pointwise_divergence, quadratic, sir_detection_report, skr_detection_report,
    stacked_divergence, threshold_sir, threshold_skr,
)
from app.core.projection import sir_project, skr_costate, skr_estimate, skr_forward
from app.core.signals import stack_samples
from app.errors import AlphaOutOfRange, DimensionMismatch, FormulaDisagreement, GammaOutOfRange
from app.models.divergence import GeneratingFunction, Verdict
from app.models.results import SkrProjectionResult
from app.models.signals import SignalWindow
from tests.helpers import add_to_outputs, plant_data, sinusoid_input

DT = 0.01
vectors = arrays(np.float64, 3, elements=st.floats(-10, 10))
simplex = arrays(np.float64, 3, elements=st.floats(0.01, 1.0)).map(lambda a: a / a.sum())


# ==================== GENERATORS ====================
@pytest.mark.property
@settings(max_examples=200, deadline=None)
@given(vectors, vectors)
def test_quadratic_divergence_is_half_squared_distance(a, b):
    phi = quadratic()
    assert bregman(phi, a, b) == pytest.approx(0.5 * np.sum((a - b) ** 2), abs=1e-9)
    assert bregman(phi, a, b) >= -1e-12
    assert bregman(phi, a, b) == pytest.approx(legendre_form(phi, a, b), abs=1e-9)


@pytest.mark.property
@settings(max_examples=200, deadline=None)
@given(simplex, simplex)
def test_kl_divergence_is_nonnegative(a, b):
    phi = negative_entropy()
    assert bregman(phi, a, b) >= -1e-12
    assert bregman(phi, a, a) == pytest.approx(0.0, abs=1e-12)
    assert bregman(phi, a, b) == pytest.approx(legendre_form(phi, a, b), abs=1e-9)


def test_kl_reference_values():
    phi = negative_entropy()
    assert bregman(phi, [0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.14384103622589045, abs=1e-12)
    assert dual_bregman(phi, [0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.13081203594113694, abs=1e-12)


def test_bregman_dimension_check():
    with pytest.raises(DimensionMismatch):
        bregman(quadratic(), [1.0, 2.0], [1.0])


def test_convexity_certificate():
    assert certify_convexity(quadratic(), 3).convex
    assert certify_convexity(negative_entropy(), 3, low=1e-3, high=1.0).convex
    concave = GeneratingFunction(value=lambda a: -float(np.dot(a, a)), gradient=lambda a: -2.0 * np.asarray(a))
    assert not certify_convexity(concave, 2).convex


# ==================== EVALUATION ====================
def test_pointwise_forms_must_agree():
    z = np.array([[1.0, 2.0], [0.5, -1.0]])
    zhat = np.array([[0.9, 2.1], [0.5, -1.0]])
    H = np.sum(zhat * z, axis=1) - 0.5 * np.sum(zhat ** 2, axis=1)
    assert pointwise_divergence(z, zhat, H) == pytest.approx(0.5 * np.sum((z - zhat) ** 2, axis=1))
    with pytest.raises(FormulaDisagreement):
        pointwise_divergence(z, zhat, H + 1e-3)


@pytest.mark.property
@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20).flatmap(lambda M: st.tuples(
    arrays(np.float64, (M, 2), elements=st.floats(-5, 5)), arrays(np.float64, (M, 2), elements=st.floats(-5, 5)),
)))
def test_stacked_divergence_is_window_mean(pair):
    z, zhat = pair
    stacked = stacked_divergence(stack_samples(z), stack_samples(zhat))
    assert stacked == pytest.approx(np.mean(pointwise_divergence(z, zhat)), abs=1e-9)


def test_thresholds():
    zM = stack_samples(np.array([[3.0, 4.0]]))
    assert threshold_sir(0.95, zM) == pytest.approx(0.025 * 25.0)
    assert threshold_skr(0.05, zM) == pytest.approx(0.025 * 25.0)
    for gamma in (0.49, 1.01):
        with pytest.raises(GammaOutOfRange):
            threshold_sir(gamma, zM)
    for alpha in (0.0, 1.0):
        with pytest.raises(AlphaOutOfRange):
            threshold_skr(alpha, zM)


def test_decision_is_strict():
    assert decide(1.0, 1.0) is Verdict.FAULT_FREE
    assert decide(1.0 + 1e-12, 1.0) is Verdict.FAULTY


@pytest.mark.property
@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.5, 1.0), st.floats(0.5, 1.0))
def test_lowering_gamma_never_creates_a_fault(J, gamma_a, gamma_b):
    assume(gamma_a != gamma_b)
    low, high = sorted((gamma_a, gamma_b))
    zM = stack_samples(np.array([[1.0, 2.0], [2.0, -1.0]]))
    if decide(J, threshold_sir(high, zM)) is Verdict.FAULT_FREE:
        assert decide(J, threshold_sir(low, zM)) is Verdict.FAULT_FREE


# ==================== DETECTION ====================
def _sensor_bias_window(bundle, M=2001, bias=0.5, t_on=5.0):
    data = plant_data(bundle, sinusoid_input(M, DT), DT)
    return add_to_outputs(data, np.where(DT * np.arange(M) >= t_on, bias, 0.0))


def test_sir_detects_sensor_bias(lti_bundle, lti_pair):
    sir, _ = lti_pair
    window = _sensor_bias_window(lti_bundle)
    result = sir_project(sir, window)
    report = sir_detection_report(window, result, gamma=0.95)
    assert report.verdict is Verdict.FAULTY
    assert report.J > report.J_th
    assert report.J == evaluate_J_sir(window, result)
    assert report.clamped_samples == 0
    assert len(report.divergence_series) == window.M


def test_sir_nominal_window_is_fault_free(lti_bundle, lti_pair):
    sir, _ = lti_pair
    window = plant_data(lti_bundle, sinusoid_input(2001, DT), DT).slice(200, 400)
    result = sir_project(sir, plant_data(lti_bundle, sinusoid_input(2001, DT), DT)).slice(200, 400)
    report = sir_detection_report(window, result, gamma=0.95)
    assert report.verdict is Verdict.FAULT_FREE
    assert report.J / report.energy < 1e-6
    assert report.energy_ratio == pytest.approx(1.0, abs=1e-6)


def test_zero_energy_window_is_fault_free(lti_pair):
    sir, _ = lti_pair
    window = SignalWindow(t0=0.0, dt=DT, u=np.zeros(50), y=np.zeros(50))
    report = sir_detection_report(window, sir_project(sir, window))
    assert report.verdict is Verdict.FAULT_FREE
    assert report.J == 0.0


def test_skr_detects_actuator_gain_fault_on_cubic(cubic_bundle, cubic_pair):
    _, skr = cubic_pair
    M = 2001
    u = sinusoid_input(M, DT)
    applied = np.where((DT * np.arange(M) >= 5.0)[:, None], 0.5 * u, u)
    record = SignalWindow(t0=0.0, dt=DT, u=u, y=plant_data(cubic_bundle, applied, DT).y)
    residual, states = skr_forward(skr, record)
    start = 600
    window = record.slice(start, M)
    r, xhat = residual.samples[start:], states[start:]
    lam = skr_costate(skr, r, xhat, window)
    result = SkrProjectionResult(
        t0=window.t0, dt=DT, p=1, zdelta=skr_estimate(skr, xhat, lam, r), residual_r=r, costate=lam, state_xhat=xhat,
    )
    assert skr_detection_report(window, result, alpha=0.05).verdict is Verdict.FAULTY
    assert skr_detection_report(window, result, alpha=0.99).verdict is Verdict.FAULT_FREE


def test_minimality_of_the_projection(lti_bundle, lti_pair):
    sir, _ = lti_pair
    window = _sensor_bias_window(lti_bundle, M=1001)
    result = sir_project(sir, window)
    report = minimality_check(window, result, sir, n_candidates=50, seed=3)
    assert report.passed
    assert report.n_candidates == 50
    assert report.min_margin > 0.0
