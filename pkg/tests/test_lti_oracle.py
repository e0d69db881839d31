import numpy as np
import pytest

from app.core.factorization import lti_factorize, lti_normalized_pair
from app.core.lti_oracle import (
    assemble_factors, block_identity_defect, frequency_projector, inner_defects, observer_equivalence_check,
    orthogonal_project, probe_frequencies, pythagoras_check, simulate_transfer,
)
from app.core.projection import sir_project
from app.errors import DimensionMismatch
from app.harness.verify import random_stable_plant, smooth_latent
from app.models.results import SirCostate
from app.models.signals import SignalWindow
from app.models.systems import LtiSystem
from tests.helpers import gaussian_taper

SQRT2 = np.sqrt(2.0)
SCALAR = LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
DT = 0.01


@pytest.fixture(scope="module")
def scalar_factors():
    fac = lti_factorize(SCALAR)
    return fac, *assemble_factors(fac, SCALAR)


def _tapered_window(M=4001, seed=7, bias=0.5):
    envelope = gaussian_taper(M, DT)[:, None]
    u = envelope * smooth_latent(M, 1, DT, seed=seed)
    y = envelope * (smooth_latent(M, 1, DT, seed=seed + 100) + bias)
    return SignalWindow(t0=0.0, dt=DT, u=u, y=y)


def test_kernel_factor_closed_form(scalar_factors):
    _, _, K0 = scalar_factors
    for omega in (0.0, 0.3, 1.0, 7.0):
        s = 1j * omega
        expected = np.array([[-1.0 / (s + SQRT2), (s + 1.0) / (s + SQRT2)]])
        assert np.allclose(K0.response(omega), expected, atol=1e-12)


@pytest.mark.parametrize("plant", [SCALAR, random_stable_plant(), random_stable_plant(seed=5, n=3, p=2, m=2)])
def test_factors_are_inner_and_coinner(plant):
    I0, K0 = assemble_factors(lti_factorize(plant), plant)
    inner, coinner = inner_defects(I0, K0)
    assert inner < 1e-8
    assert coinner < 1e-8
    assert block_identity_defect(I0, K0) < 1e-8
    for omega in probe_frequencies(20):
        assert np.linalg.norm(K0.response(omega) @ I0.response(omega), 2) < 1e-9


def test_frequency_projector_is_orthogonal(scalar_factors):
    _, I0, _ = scalar_factors
    for omega in (0.1, 1.0, 10.0):
        P = frequency_projector(I0, omega)
        assert np.allclose(P @ P, P, atol=1e-12)
        assert np.allclose(P, P.conj().T, atol=1e-12)


def test_time_domain_projection_matches_frequency_projector(scalar_factors):
    _, I0, _ = scalar_factors
    omega, M = 1.0, 6001
    times = DT * np.arange(M)
    z = np.column_stack([np.cos(omega * times), 0.3 * np.sin(omega * times)])
    window = SignalWindow.from_z(0.0, DT, z, 1)
    projected = orthogonal_project(I0, window)

    P = frequency_projector(I0, omega)
    phasor = np.array([1.0, -0.3j])
    expected = np.real(np.outer(np.exp(1j * omega * times), P @ phasor))
    middle = slice(2000, 4000)
    assert np.max(np.abs(projected.z[middle] - expected[middle])) < 1e-3


def test_pythagoras_and_observer_equivalence(scalar_factors):
    fac, I0, _ = scalar_factors
    for seed in (1, 2, 3):
        window = _tapered_window(seed=seed)
        projected = orthogonal_project(I0, window)
        assert pythagoras_check(window, projected) < 1e-6
        assert observer_equivalence_check(SCALAR, fac, window, projected) < 1e-6


@pytest.mark.parametrize("plant", [SCALAR, random_stable_plant()])
def test_adjoint_projection_agrees_with_oracle(plant):
    sir, _, fac = lti_normalized_pair(plant, name="oracle")
    I0, _ = assemble_factors(fac, plant)
    window = _tapered_window()
    oracle = orthogonal_project(I0, window)
    pipeline = sir_project(sir, window, costate=SirCostate.ADJOINT)
    assert np.max(np.abs(pipeline.zhat - oracle.z)) / np.max(np.abs(oracle.z)) < 1e-5


def test_kernel_conjugate_signals_project_to_zero(scalar_factors):
    fac, I0, K0 = scalar_factors
    sir, _, _ = lti_normalized_pair(SCALAR)
    M = 4001
    r = gaussian_taper(M, DT)[:, None] * smooth_latent(M, 1, DT, seed=9)
    window = SignalWindow.from_z(0.0, DT, simulate_transfer(K0.conjugate(), r, DT), 1)
    projected = sir_project(sir, window, costate=SirCostate.ADJOINT)
    assert np.max(np.abs(projected.zhat)) / np.max(np.abs(window.z)) < 1e-6
    assert np.max(np.abs(orthogonal_project(I0, window).z)) / np.max(np.abs(window.z)) < 1e-6


def test_transfer_simulation_checks_inputs(scalar_factors):
    _, I0, _ = scalar_factors
    with pytest.raises(DimensionMismatch):
        simulate_transfer(I0, np.zeros((10, 2)), DT)


def test_conjugate_runs_backward(scalar_factors):
    _, I0, _ = scalar_factors
    conjugate = I0.conjugate()
    assert conjugate.anti_causal and not I0.anti_causal
    assert conjugate.conjugate().anti_causal is False
    impulse = np.zeros((201, 2))
    impulse[-1] = 1.0
    response = simulate_transfer(conjugate, impulse, DT)
    assert np.abs(response[0]).max() < np.abs(response[-2]).max()
