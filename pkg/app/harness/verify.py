"""Invariant suites behind the `verify` command.

Every check produces a CheckRecord; failures are results, not exceptions.
All randomness is seeded so repeated runs print identical defects.
"""
import logging
from typing import Callable, Optional

import numpy as np

from app.config import settings
from app.core.divergence import (
    bregman, certify_convexity, dual_bregman, evaluate_J_sir, legendre_form, minimality_check,
    negative_entropy, quadratic, sir_detection_report,
)
from app.core.estimation import estimate_uncertainty, ls_optimality_check
from app.core.factorization import (
    hje_sir_residual, hje_skr_residual, image_data, inner_conditions, lti_factorize, lti_normalized_pair,
    probe_points, riccati_residuals, storage_gradient_defect, verify_annihilation, verify_coinner,
    verify_inner,
)
from app.core.lti_oracle import (
    assemble_factors, block_identity_defect, inner_defects, observer_equivalence_check,
    orthogonal_project, probe_frequencies, pythagoras_check, simulate_transfer,
)
from app.core.plants import BUILTIN_PLANTS, PlantBundle, normalized_pair
from app.core.projection import (
    costate_closure_defect, hamiltonians_skr, legendre_consistency_check, sir_project, skr_project,
)
from app.core.systems import simulate
from app.errors import ProjectionError
from app.models.divergence import Verdict
from app.models.realizations import SirRealization
from app.models.results import SirCostate, SkrCostate
from app.models.signals import LatentWindow, SignalWindow
from app.models.systems import LtiSystem
from app.schemas.report import CheckRecord, VerifyReport

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
VERIFY_SEED = 7


def record(name: str, value: float, tolerance: float, worst_point=None, detail: Optional[str] = None) -> CheckRecord:
    value = float(value)
    return CheckRecord(
        name=name,
        max_residual=value,
        tolerance=float(tolerance),
        passed=bool(np.isfinite(value) and value <= tolerance),
        worst_point=None if worst_point is None else [float(v) for v in np.ravel(worst_point)],
        detail=detail,
    )


def _guarded(name: str, check: Callable[[], list[CheckRecord]]) -> list[CheckRecord]:
    """Run a check group, turning a raised numerical error into a failed record."""
    try:
        return check()
    except ProjectionError as exc:
        logger.error(f"{name} raised {type(exc).__name__}: {exc}")
        return [CheckRecord(
            name=name, max_residual=float("inf"), tolerance=0.0, passed=False,
            detail=f"{type(exc).__name__}: {exc.detail}",
        )]


# ==================== FIXTURES ====================
def random_stable_plant(seed: int = VERIFY_SEED, n: int = 3, p: int = 1, m: int = 1) -> LtiSystem:
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.normal(size=(n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(n)
    return LtiSystem(A=A, B=rng.normal(size=(n, p)), C=rng.normal(size=(m, n)), D=0.5 * rng.normal(size=(m, p)))


def smooth_latent(M: int, p: int, dt: float, seed: int = VERIFY_SEED, tones: int = 4) -> np.ndarray:
    """Sum of sinusoids with seeded frequencies in [0.2, 2] rad/s and unit-order amplitude."""
    rng = np.random.Generator(np.random.Philox(seed))
    times = dt * np.arange(M)
    latent = np.zeros((M, p))
    for j in range(p):
        omegas = rng.uniform(0.2, 2.0, size=tones)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=tones)
        weights = rng.uniform(0.3, 1.0, size=tones)
        latent[:, j] = np.sin(np.outer(times, omegas) + phases) @ weights / np.sqrt(tones)
    return latent


def taper(M: int, dt: float) -> np.ndarray:
    """Gaussian envelope centred in the window with a tenth of its length as spread."""
    times = dt * np.arange(M)
    span = dt * (M - 1)
    return np.exp(-0.5 * ((times - 0.5 * span) / (0.1 * span)) ** 2)


def nominal_window(bundle: PlantBundle, M: int, dt: float, seed: int = VERIFY_SEED) -> SignalWindow:
    u = smooth_latent(M, bundle.system.p, dt, seed=seed)
    _, data = simulate(bundle.system, LatentWindow(t0=0.0, dt=dt, samples=u, kind="input"), None)
    return data


def with_sensor_disturbance(data: SignalWindow, profile: np.ndarray) -> SignalWindow:
    return SignalWindow(t0=data.t0, dt=data.dt, u=data.u, y=data.y + np.asarray(profile).reshape(data.M, -1))


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), settings.ENERGY_FLOOR))


def _plants() -> list[PlantBundle]:
    return [factory() for factory in BUILTIN_PLANTS.values()]


# ==================== FACTORIZATION ====================
def factorization_suite() -> list[CheckRecord]:
    checks = []

    def riccati_checks():
        scalar = LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
        fac = lti_factorize(scalar)
        records = [
            record("riccati:scalar_X", abs(fac.riccati_X[0, 0] - (SQRT2 - 1.0)), 1e-10),
            record("riccati:scalar_Y", abs(fac.riccati_Y[0, 0] - (SQRT2 - 1.0)), 1e-10),
        ]
        plant = random_stable_plant()
        fac = lti_factorize(plant)
        res_x, res_y = riccati_residuals(plant, fac)
        records.append(record("riccati:random_residual_X", res_x, 1e-10 * (1.0 + np.linalg.norm(fac.riccati_X))))
        records.append(record("riccati:random_residual_Y", res_y, 1e-10 * (1.0 + np.linalg.norm(fac.riccati_Y))))
        return records

    checks += _guarded("riccati", riccati_checks)

    for bundle in _plants():
        def plant_checks(bundle=bundle):
            probe = probe_points(bundle.system.n)
            sir, skr = normalized_pair(bundle)
            hje_p = max(abs(hje_sir_residual(bundle.system, bundle.sir_storage, x)) for x in probe)
            hje_v = max(abs(hje_skr_residual(bundle.system, bundle.skr_storage, x)) for x in probe)
            grad_p, point_p = storage_gradient_defect(bundle.sir_storage, probe)
            grad_v, point_v = storage_gradient_defect(bundle.skr_storage, probe)
            records = [
                record(f"{bundle.name}:hje_sir", hje_p, settings.HJE_TOLERANCE),
                record(f"{bundle.name}:hje_skr", hje_v, settings.HJE_TOLERANCE),
                record(f"{bundle.name}:storage_gradient_P", grad_p, 1e-6, point_p),
                record(f"{bundle.name}:storage_gradient_V", grad_v, 1e-6, point_v),
            ]
            records += [r.model_copy(update={"name": f"{bundle.name}:{r.name}"}) for r in inner_conditions(sir, probe)]
            records += [r.model_copy(update={"name": f"{bundle.name}:{r.name}"}) for r in verify_coinner(skr, probe)]

            dt, M = 1e-3, 10001
            v = LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, sir.p, dt), kind="latent")
            balance = verify_inner(sir, v)
            records.append(balance.model_copy(update={"name": f"{bundle.name}:{balance.name}"}))
            if bundle.lti is not None:
                spectral = verify_inner(sir, probe_frequencies())
                records.append(spectral.model_copy(update={"name": f"{bundle.name}:{spectral.name}"}))
            scale = float(np.max(np.abs(v.samples)))
            records.append(record(f"{bundle.name}:annihilation", verify_annihilation(skr, sir, v), 1e-6 * scale))
            return records

        checks += _guarded(f"{bundle.name}:factorization", plant_checks)
    return checks


# ==================== PROJECTION ====================
def _fixed_point_checks(sir: SirRealization, name: str, windows: int, dt: float, M: int) -> list[CheckRecord]:
    """Worst fixed-point and double-projection defects over seeded image windows."""
    worst_fixed, worst_again = (0.0, None), (0.0, None)
    for index in range(windows):
        seed = VERIFY_SEED + index
        latent = LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, sir.p, dt, seed=seed), kind="latent")
        _, image = image_data(sir, latent)
        result = sir_project(sir, image)
        again = sir_project(sir, result.zhat_window())
        fixed = _relative(result.zhat, image.z)
        repeated = _relative(again.zhat, result.zhat)
        if fixed >= worst_fixed[0]:
            worst_fixed = (fixed, seed)
        if repeated >= worst_again[0]:
            worst_again = (repeated, seed)
    return [
        record(f"{name}:fixed_point", worst_fixed[0], 1e-6, detail=f"{windows} windows, worst seed {worst_fixed[1]}"),
        record(f"{name}:idempotency", worst_again[0], 1e-4, detail=f"{windows} windows, worst seed {worst_again[1]}"),
    ]


def _projection_plant_checks(
    bundle: PlantBundle, dt: float = 0.01, M: int = 2001, windows: int = 20
) -> list[CheckRecord]:
    sir, skr = normalized_pair(bundle)
    name = bundle.name
    records = _fixed_point_checks(sir, name, windows, dt, 1001)

    latent = LatentWindow(t0=0.0, dt=dt, samples=smooth_latent(M, sir.p, dt), kind="latent")
    _, image = image_data(sir, latent)
    result = sir_project(sir, image)
    records.append(record(f"{name}:costate_closure", costate_closure_defect(sir, image, result), 1e-3))
    squared = np.sum(image.z * image.z, axis=1)
    on_manifold = float(np.max(np.abs(result.H - 0.5 * squared)) / max(np.max(squared), settings.ENERGY_FLOOR))
    records.append(record(f"{name}:hamiltonian_on_manifold", on_manifold, 1e-6))

    data = with_sensor_disturbance(nominal_window(bundle, M, dt), 0.5 * taper(M, dt))
    faulty = sir_project(sir, data)
    legendre = legendre_consistency_check(faulty, data)
    records.append(record(f"{name}:legendre", legendre, 1e-12 * max(1.0, float(np.max(np.sum(data.z ** 2, axis=1))))))
    excess = float(np.max(faulty.H - 0.5 * np.sum(data.z ** 2, axis=1)))
    records.append(record(f"{name}:energy_maximality", max(excess, 0.0), 1e-9))

    stationary = skr_project(skr, data, costate=SkrCostate.STATIONARY)
    direct, legendre_form_skr, _ = hamiltonians_skr(skr, stationary.state_xhat, data.z, stationary.residual_r)
    records.append(record(
        f"{name}:skr_hamiltonian_identity", float(np.max(np.abs(direct - legendre_form_skr))),
        1e-8 * max(1.0, float(np.max(np.sum(data.z ** 2, axis=1)))),
    ))

    nominal = nominal_window(bundle, M, dt)
    null = skr_project(skr, nominal)
    ratio = float(np.sum(null.zdelta ** 2) / np.sum(nominal.z ** 2))
    records.append(record(f"{name}:skr_nominal_null", ratio, 1e-10))

    if bundle.lti is None:
        # the estimate is linear along the observer trajectory, so nonlinear plants get a small-signal window
        envelope = 0.01 * taper(M, dt).reshape(-1, 1)
        tapered = SignalWindow(t0=0.0, dt=dt, u=envelope * data.u, y=envelope * data.y)
        first = skr_project(skr, tapered)
        second = skr_project(skr, first.zdelta_window())
        records.append(record(f"{name}:skr_idempotency", _relative(second.zdelta, first.zdelta), 1e-3))
    return records


def _lti_projection_checks() -> list[CheckRecord]:
    records = []
    dt, M = 0.01, 4001
    for label, plant in (("scalar_lti", LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])),
                         ("random3", random_stable_plant())):
        sir, skr, fac = lti_normalized_pair(plant, name=label)
        I0, K0 = assemble_factors(fac, plant)
        envelope = taper(M, dt).reshape(-1, 1)

        r = envelope * smooth_latent(M, plant.m, dt, seed=VERIFY_SEED + 1)
        conjugate_data = SignalWindow.from_z(0.0, dt, simulate_transfer(K0.conjugate(), r, dt), plant.p)
        annihilated = sir_project(sir, conjugate_data, costate=SirCostate.ADJOINT)
        records.append(record(
            f"{label}:kernel_conjugate_annihilation",
            float(np.max(np.abs(annihilated.zhat))) / float(np.max(np.abs(conjugate_data.z))), 1e-6,
        ))

        data = nominal_window(PlantBundle(name=label, system=sir.base, lti=plant), M, dt)
        data = SignalWindow(t0=0.0, dt=dt, u=envelope * data.u, y=envelope * data.y)
        data = with_sensor_disturbance(data, 0.5 * taper(M, dt))
        oracle = orthogonal_project(I0, data)
        pipeline = sir_project(sir, data, costate=SirCostate.ADJOINT)
        records.append(record(f"{label}:master_cross_validation", _relative(pipeline.zhat, oracle.z), 1e-5))

        first = skr_project(skr, data)
        second = skr_project(skr, first.zdelta_window())
        records.append(record(f"{label}:skr_idempotency", _relative(second.zdelta, first.zdelta), 1e-4))
    return records


def projection_suite() -> list[CheckRecord]:
    checks = []
    for bundle in _plants():
        checks += _guarded(f"{bundle.name}:projection", lambda bundle=bundle: _projection_plant_checks(bundle))
    checks += _guarded("lti:projection", _lti_projection_checks)
    return checks


# ==================== DIVERGENCE ====================
def _generator_checks() -> list[CheckRecord]:
    rng = np.random.Generator(np.random.Philox(VERIFY_SEED))
    phi, kl = quadratic(), negative_entropy()
    a, b = rng.normal(size=(10000, 3)), rng.normal(size=(10000, 3))
    worst_quadratic = min(bregman(phi, x, y) for x, y in zip(a, b))
    pa, pb = rng.dirichlet(np.ones(3), size=10000), rng.dirichlet(np.ones(3), size=10000)
    worst_kl = min(bregman(kl, x, y) for x, y in zip(pa, pb))
    three_term = max(abs(bregman(phi, x, y) - legendre_form(phi, x, y)) for x, y in zip(a[:1000], b[:1000]))
    identity = max(abs(bregman(phi, x, x)) + abs(bregman(kl, q, q)) for x, q in zip(a[:1000], pa[:1000]))
    example = abs(bregman(kl, [0.5, 0.5], [0.25, 0.75]) - 0.14384103622589045)
    dual = abs(dual_bregman(kl, [0.5, 0.5], [0.25, 0.75]) - 0.13081203594113694)
    return [
        record("bregman:quadratic_nonnegative", max(-worst_quadratic, 0.0), 1e-12),
        record("bregman:kl_nonnegative", max(-worst_kl, 0.0), 1e-12),
        record("bregman:identity", identity, 1e-12),
        record("bregman:three_term_identity", three_term, 1e-10),
        record("bregman:kl_example", example, 1e-10),
        record("bregman:kl_dual_example", dual, 1e-10),
        record("bregman:quadratic_convex", 0.0 if certify_convexity(phi, 3).convex else 1.0, 0.0),
        record("bregman:entropy_convex", 0.0 if certify_convexity(kl, 3, low=1e-3, high=1.0).convex else 1.0, 0.0),
    ]


def _evaluation_checks(bundle: PlantBundle, dt: float = 0.01, M: int = 1001) -> list[CheckRecord]:
    sir, _ = normalized_pair(bundle)
    records = []
    nominal = nominal_window(bundle, M, dt)
    steady = np.where(np.arange(M) >= M // 2, 0.5, 0.0)
    for label, data in (("nominal", nominal), ("sensor_bias", with_sensor_disturbance(nominal, steady))):
        result = sir_project(sir, data)
        report = sir_detection_report(data, result)
        records.append(record(f"{bundle.name}:{label}:stacking", 0.0 if report.J == evaluate_J_sir(data, result) else 1.0, 0.0))
        minimality = minimality_check(data, result, sir)
        records.append(record(
            f"{bundle.name}:{label}:minimality", float(minimality.violations), 0.0,
            detail=f"{minimality.n_candidates} candidates, smallest margin {minimality.min_margin:.3e}",
        ))
    return records


def _orthogonality_checks(windows: int = 20, dt: float = 0.01, M: int = 4001) -> list[CheckRecord]:
    plant = LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]])
    sir, _, fac = lti_normalized_pair(plant, name="scalar_lti")
    I0, _ = assemble_factors(fac, plant)
    bundle = PlantBundle(name="scalar_lti", system=sir.base, lti=plant)
    envelope = taper(M, dt)
    worst_pythagoras, worst_observer = 0.0, 0.0
    for index in range(windows):
        data = nominal_window(bundle, M, dt, seed=VERIFY_SEED + index)
        data = SignalWindow(t0=0.0, dt=dt, u=envelope[:, None] * data.u, y=envelope[:, None] * data.y)
        data = with_sensor_disturbance(data, 0.5 * (index % 3) * envelope)
        projected = orthogonal_project(I0, data)
        worst_pythagoras = max(worst_pythagoras, pythagoras_check(data, projected))
        worst_observer = max(worst_observer, observer_equivalence_check(plant, fac, data, projected))
    return [
        record("scalar_lti:pythagoras", worst_pythagoras, 1e-6),
        record("scalar_lti:observer_equivalence", worst_observer, 1e-6),
    ]


def divergence_suite() -> list[CheckRecord]:
    checks = _guarded("bregman", _generator_checks)
    for bundle in _plants():
        checks += _guarded(f"{bundle.name}:evaluation", lambda bundle=bundle: _evaluation_checks(bundle))
    checks += _guarded("scalar_lti:orthogonality", _orthogonality_checks)
    return checks


# ==================== ESTIMATION ====================
def _estimation_checks(bundle: PlantBundle, dt: float = 0.01, M: int = 4001) -> list[CheckRecord]:
    _, skr = normalized_pair(bundle)
    name = bundle.name
    nominal = nominal_window(bundle, M, dt)
    records = []

    null = estimate_uncertainty(skr, nominal)
    records.append(record(f"{name}:nominal_defect", null.consistency_defect, 1e-8))
    records.append(record(
        f"{name}:nominal_null", float(np.sum(null.zdelta ** 2) / np.sum(nominal.z ** 2)), 1e-10
    ))

    disturbance = 0.5 * taper(M, dt)
    data = with_sensor_disturbance(nominal, disturbance)
    estimate = estimate_uncertainty(skr, data)
    tolerance = 1e-4 if bundle.lti is not None else 1e-3
    scale = float(np.max(np.linalg.norm(estimate.residual_r, axis=1)))
    records.append(record(f"{name}:replay_consistency", estimate.consistency_defect / scale, tolerance))

    if bundle.lti is not None:
        doubled = estimate_uncertainty(skr, with_sensor_disturbance(nominal, 2.0 * disturbance))
        records.append(record(f"{name}:linearity", _relative(doubled.zdelta, 2.0 * estimate.zdelta), 1e-6))

    report = ls_optimality_check(
        bundle.system, bundle.skr_storage, bundle.skr_gain or (lambda x: skr.L(x)), [0.8, 0.9, 1.1, 1.2], data
    )
    margin = report.min_margin if report.min_margin is not None else 0.0
    records.append(record(
        f"{name}:ls_optimality", max(-margin, 0.0), 1e-9 * max(report.reference_cost, 1.0),
        detail=f"reference cost {report.reference_cost:.6g}, smallest margin {margin:.3e}",
    ))
    return records


def estimation_suite() -> list[CheckRecord]:
    checks = []
    for bundle in _plants():
        checks += _guarded(f"{bundle.name}:estimation", lambda bundle=bundle: _estimation_checks(bundle))
    return checks


# ==================== DETECTION ====================
def detection_trials(
    trials: int = 100, M: int = 500, gamma: float = 0.95, bias: float = 0.5, dt: float = 0.01
) -> tuple[int, int]:
    """Seeded SIR detection runs on scalar_lti under a unit sinusoid with random phase.

    Each trial projects a 2M-sample record and tests its second half as one window,
    once clean and once with a sensor bias switched on mid-window.
    Returns (false alarms, detections).
    """
    bundle = BUILTIN_PLANTS["scalar_lti"]()
    sir, _ = normalized_pair(bundle)
    steps = 2 * M
    times = dt * np.arange(steps)
    step = np.where(np.arange(steps) >= M + M // 2, bias, 0.0)
    false_alarms, detections = 0, 0
    for trial in range(trials):
        rng = np.random.Generator(np.random.Philox(VERIFY_SEED + trial))
        u = np.sin(times + rng.uniform(0.0, 2.0 * np.pi)).reshape(-1, 1)
        _, nominal = simulate(bundle.system, LatentWindow(t0=0.0, dt=dt, samples=u, kind="input"), None)
        for data, faulty in ((nominal, False), (with_sensor_disturbance(nominal, step), True)):
            result = sir_project(sir, data)
            report = sir_detection_report(data.slice(M, steps), result.slice(M, steps), gamma=gamma)
            if report.verdict is Verdict.FAULTY:
                if faulty:
                    detections += 1
                else:
                    false_alarms += 1
    logger.info(f"detection trials: {false_alarms}/{trials} false alarms, {detections}/{trials} detections")
    return false_alarms, detections


def detection_suite(trials: int = 100) -> list[CheckRecord]:
    def checks():
        false_alarms, detections = detection_trials(trials)
        return [
            record("scalar_lti:false_alarms", false_alarms, 0, detail=f"{false_alarms}/{trials} nominal windows flagged"),
            record(
                "scalar_lti:missed_detections", trials - detections, 0,
                detail=f"{detections}/{trials} biased windows flagged",
            ),
        ]

    return _guarded("detection", checks)


# ==================== LTI ORACLE ====================
def lti_oracle_suite() -> list[CheckRecord]:
    def checks():
        records = []
        plants = {
            "scalar_lti": LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]], D=[[0.0]]),
            "random3": random_stable_plant(),
        }
        for label, plant in plants.items():
            fac = lti_factorize(plant)
            I0, K0 = assemble_factors(fac, plant)
            inner, coinner = inner_defects(I0, K0)
            records.append(record(f"{label}:inner", inner, 1e-8))
            records.append(record(f"{label}:coinner", coinner, 1e-8))
            records.append(record(f"{label}:block_identity", block_identity_defect(I0, K0), 1e-8))
            annihilation = max(np.linalg.norm(K0.response(w) @ I0.response(w), 2) for w in probe_frequencies(20))
            records.append(record(f"{label}:kernel_image", annihilation, 1e-10))

        rng = np.random.Generator(np.random.Philox(VERIFY_SEED))
        A = -np.diag([1.0, 2.0, 3.0]) + 0.1 * rng.normal(size=(3, 3))
        A = 0.5 * (A + A.T)
        B = rng.normal(size=(3, 2))
        symmetric = LtiSystem(A=A, B=B, C=B.T, D=np.zeros((2, 2)))
        fac = lti_factorize(symmetric)
        records.append(record("symmetric:duality", float(np.max(np.abs(fac.riccati_Y - fac.riccati_X))), 1e-8))
        return records

    return _guarded("lti_oracle", checks)


SUITES: dict[str, Callable[[], list[CheckRecord]]] = {
    "factorization": factorization_suite,
    "projection": projection_suite,
    "divergence": divergence_suite,
    "estimation": estimation_suite,
    "detection": detection_suite,
    "lti_oracle": lti_oracle_suite,
}
SUITE_NAMES = [*SUITES, "all"]


def run_verify(suite: str) -> VerifyReport:
    if suite not in SUITE_NAMES:
        raise KeyError(suite)
    logger.info("=" * 50)
    logger.info(f"VERIFY - {suite}")
    logger.info("=" * 50)
    names = list(SUITES) if suite == "all" else [suite]
    checks = []
    for name in names:
        results = SUITES[name]()
        for check in results:
            status = "PASS" if check.passed else "FAIL"
            logger.info(f"[{status}] {name}/{check.name}: {check.max_residual:.3e} (tol {check.tolerance:.1e})")
        checks += results
    passed = all(check.passed for check in checks)
    logger.info("=" * 50)
    logger.info(f"VERIFY {suite.upper()}: {'PASSED' if passed else 'FAILED'} ({len(checks)} checks)")
    logger.info("=" * 50 + "\n")
    return VerifyReport(suite=suite, checks=checks, passed=passed)
