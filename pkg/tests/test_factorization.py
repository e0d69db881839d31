from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from app.core.factorization import (
    build_skr, hje_sir_residual, hje_skr_residual, image_data, inner_conditions, inv_sqrt_sym, lti_factorize,
    lti_normalized_pair, normalize_sir, normalize_skr, probe_points, riccati_residuals,
    storage_gradient_defect, verify_annihilation, verify_coinner, verify_inner,
)
from app.core.lti_oracle import probe_frequencies
from app.core.projection import skr_forward
from app.core.riccati import solve_care_kleinman
from app.errors import GainConditionViolated, HjeResidualTooLarge, NotNormalized, SingularW
from app.harness.verify import random_stable_plant, smooth_latent
from app.models.realizations import StorageFunction
from app.models.signals import LatentWindow
from app.models.systems import InputHold, LtiSystem

SQRT2 = np.sqrt(2.0)


def test_scalar_riccati_solutions():
    fac = lti_factorize(LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]]))
    assert fac.riccati_X[0, 0] == pytest.approx(SQRT2 - 1.0, abs=1e-12)
    assert fac.riccati_Y[0, 0] == pytest.approx(SQRT2 - 1.0, abs=1e-12)
    assert fac.F[0, 0] == pytest.approx(1.0 - SQRT2, abs=1e-12)
    assert fac.L0[0, 0] == pytest.approx(SQRT2 - 1.0, abs=1e-12)


def test_kleinman_matches_scipy_on_random_plant():
    plant = random_stable_plant(seed=3, n=4, p=2, m=2)
    A, B, C = plant.A, plant.B, plant.C
    X, _, residual = solve_care_kleinman(A, B @ B.T, C.T @ C)
    reference = solve_continuous_are(A, B, C.T @ C, np.eye(2))
    assert np.allclose(X, reference, atol=1e-8)
    assert residual < 1e-8


def test_riccati_residuals_are_small():
    plant = random_stable_plant()
    fac = lti_factorize(plant)
    res_x, res_y = riccati_residuals(plant, fac)
    assert res_x < 1e-9 * (1.0 + np.linalg.norm(fac.riccati_X))
    assert res_y < 1e-9 * (1.0 + np.linalg.norm(fac.riccati_Y))
    assert np.all(np.linalg.eigvalsh(fac.riccati_X) > -1e-12)


def test_symmetric_plant_has_equal_gramians():
    rng = np.random.Generator(np.random.Philox(11))
    A = -np.diag([1.0, 2.0, 3.0]) + 0.1 * rng.normal(size=(3, 3))
    A = 0.5 * (A + A.T)
    B = rng.normal(size=(3, 2))
    fac = lti_factorize(LtiSystem(A=A, B=B, C=B.T, D=np.zeros((2, 2))))
    assert np.allclose(fac.riccati_X, fac.riccati_Y, atol=1e-8)


def test_inv_sqrt_sym():
    matrix = np.array([[2.0, 0.5], [0.5, 1.0]])
    root = inv_sqrt_sym(matrix)
    assert np.allclose(root @ matrix @ root, np.eye(2))


def test_probe_grid_is_full_tensor_in_one_dimension():
    probe = probe_points(1)
    assert probe.shape == (21, 1)
    assert probe.min() == pytest.approx(-2.0) and probe.max() == pytest.approx(2.0)


def test_probe_grid_is_sampled_in_high_dimension():
    probe = probe_points(4)
    assert probe.shape == (10000, 4)
    assert np.array_equal(probe, probe_points(4))


@pytest.mark.parametrize("bundle_name", ["lti_bundle", "cubic_bundle"])
def test_storage_functions_solve_hje(bundle_name, request):
    bundle = request.getfixturevalue(bundle_name)
    probe = probe_points(1)
    assert max(abs(hje_sir_residual(bundle.system, bundle.sir_storage, x)) for x in probe) < 1e-10
    assert max(abs(hje_skr_residual(bundle.system, bundle.skr_storage, x)) for x in probe) < 1e-10
    assert storage_gradient_defect(bundle.sir_storage, probe)[0] < 1e-6
    assert storage_gradient_defect(bundle.skr_storage, probe)[0] < 1e-6


@pytest.mark.parametrize("pair_name", ["lti_pair", "cubic_pair"])
def test_pointwise_normalization(pair_name, request):
    sir, skr = request.getfixturevalue(pair_name)
    records = inner_conditions(sir) + verify_coinner(skr)
    assert {record.name for record in records} >= {"inner:lossless", "coinner:lossless"}
    assert all(record.passed for record in records), [r for r in records if not r.passed]


def test_frequency_inner_property(lti_pair):
    sir, _ = lti_pair
    record = verify_inner(sir, probe_frequencies())
    assert record.passed
    assert record.max_residual < 1e-10


def test_frequency_inner_property_random_plant():
    sir, _, _ = lti_normalized_pair(random_stable_plant(), name="random3")
    assert verify_inner(sir, probe_frequencies()).passed


@pytest.mark.parametrize("pair_name", ["lti_pair", "cubic_pair"])
def test_lossless_energy_balance(pair_name, request):
    sir, _ = request.getfixturevalue(pair_name)
    dt, M = 1e-3, 10001
    latent = LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, 1, dt), kind="latent")
    record = verify_inner(sir, latent)
    assert record.passed, record


@pytest.mark.parametrize("pair_name", ["lti_pair", "cubic_pair"])
def test_kernel_annihilates_image(pair_name, request):
    sir, skr = request.getfixturevalue(pair_name)
    dt, M = 0.01, 1001
    latent = LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, 1, dt), kind="latent")
    assert verify_annihilation(skr, sir, latent) < 1e-6


def test_mismatched_initial_states_leave_decaying_residual(cubic_pair):
    sir, skr = cubic_pair
    dt, M = 0.01, 1001
    latent = LatentWindow(t0=0.0, dt=dt, samples=np.zeros((M, 1)), kind="latent")
    assert verify_annihilation(skr, sir, latent, x0=[0.5], xhat0=[0.0]) > 0.1


def _latent(dt, T=10.0, seed=7):
    M = int(round(T / dt)) + 1
    return LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, 1, dt, seed=seed), kind="latent")


def _sampled_annihilation(sir, skr, dt):
    _, data = image_data(sir, _latent(dt), hold=InputHold.CUBIC)
    residual, _ = skr_forward(skr, data, hold=InputHold.CUBIC)
    return float(np.max(np.abs(residual.samples)))


@pytest.mark.parametrize("pair_name", ["lti_pair", "cubic_pair"])
def test_sampled_annihilation_converges_at_fourth_order(pair_name, request):
    sir, skr = request.getfixturevalue(pair_name)
    coarse = _sampled_annihilation(sir, skr, 0.02)
    fine = _sampled_annihilation(sir, skr, 0.01)
    assert fine < 1e-5
    assert coarse / fine >= 8.0


def test_cascaded_annihilation_is_exact_at_every_step_size(cubic_pair):
    sir, skr = cubic_pair
    # the observer stages reproduce the image stages, so only roundoff remains
    for dt in (0.02, 0.01):
        assert verify_annihilation(skr, sir, _latent(dt)) < 1e-10


def test_energy_balance_defect_converges_at_fourth_order(cubic_pair):
    sir, _ = cubic_pair
    coarse = verify_inner(sir, _latent(0.02), hold=InputHold.CUBIC).max_residual
    fine = verify_inner(sir, _latent(0.01), hold=InputHold.CUBIC).max_residual
    assert fine < coarse
    assert coarse / fine >= 8.0


def test_wrong_storage_is_rejected(cubic_bundle):
    doubled = StorageFunction(
        value=lambda x: 2.0 * cubic_bundle.sir_storage.value(x),
        gradient=lambda x: 2.0 * cubic_bundle.sir_storage.gradient(x),
    )
    with pytest.raises(HjeResidualTooLarge):
        normalize_sir(cubic_bundle.system, doubled)


def test_wrong_gain_is_rejected(cubic_bundle):
    with pytest.raises(GainConditionViolated):
        normalize_skr(cubic_bundle.system, cubic_bundle.skr_storage, lambda x: np.array([[0.5]]))


def test_singular_w_is_rejected(cubic_bundle):
    with pytest.raises(SingularW):
        build_skr(cubic_bundle.system, cubic_bundle.skr_gain, lambda x: np.zeros((1, 1)))


def test_inner_check_requires_normalization(cubic_pair):
    sir, _ = cubic_pair
    with pytest.raises(NotNormalized):
        verify_inner(replace(sir, normalized=False), probe_frequencies())
