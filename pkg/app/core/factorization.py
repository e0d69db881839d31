"""SIR/SKR construction, normalization and their verification checks."""
import logging
from dataclasses import replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import eigh

from app.config import settings
from app.core.riccati import care_residual, solve_care_kleinman
from app.core.systems import cascade, fd_jacobian, lift_lti, simulate
from app.errors import (
    DimensionMismatch, GainConditionViolated, GridMismatch, HjeResidualTooLarge,
    NotNormalized, SingularV, SingularW,
)
from app.models.realizations import (
    ControlFactors, FilterFactors, LtiFactorization, SirRealization, SkrRealization, StorageFunction,
)
from app.models.signals import LatentWindow, SignalWindow
from app.models.systems import AffineSystem, Grid, InputHold, LtiSystem
from app.models.transfer import TransferEvaluator
from app.schemas.report import CheckRecord

logger = logging.getLogger(__name__)


# ==================== HELPERS ====================
def inv_sqrt_sym(matrix: np.ndarray) -> np.ndarray:
    """Principal inverse square root of a symmetric positive definite matrix."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return matrix.copy()
    values, vectors = eigh(0.5 * (matrix + matrix.T))
    return (vectors / np.sqrt(values)) @ vectors.T


def probe_points(
    n: int,
    half_width: Optional[float] = None,
    points: Optional[int] = None,
    max_states: Optional[int] = None,
) -> np.ndarray:
    """Probe states on [-w, w]^n: full tensor grid, or a seeded sample when that grid is too large."""
    half_width = settings.PROBE_HALF_WIDTH if half_width is None else half_width
    points = settings.PROBE_POINTS if points is None else points
    max_states = settings.PROBE_MAX_STATES if max_states is None else max_states
    if n == 0:
        return np.zeros((1, 0))
    if points ** n <= max_states:
        axis = np.linspace(-half_width, half_width, points)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        return np.stack([coordinate.ravel() for coordinate in mesh], axis=1)
    rng = np.random.Generator(np.random.Philox(settings.PROBE_SEED))
    return rng.uniform(-half_width, half_width, size=(max_states, n))


def _worst(values: Callable[[np.ndarray], float], probe: np.ndarray) -> tuple[float, np.ndarray]:
    residuals = np.array([values(x) for x in probe])
    index = int(np.argmax(residuals))
    return float(residuals[index]), probe[index]


def _sensitivities(base: AffineSystem, x: np.ndarray):
    B = np.asarray(base.B(x), dtype=float)
    D = np.asarray(base.D(x), dtype=float)
    c = np.asarray(base.c(x), dtype=float)
    return B, D, c


# ==================== HJE RESIDUALS ====================
def hje_sir_residual(base: AffineSystem, storage: StorageFunction, x: np.ndarray) -> float:
    """P_x^T a + 1/2 c^T c - 1/2 q^T S^-1 q with q = B^T P_x + D^T c and S = I + D^T D."""
    B, D, c = _sensitivities(base, x)
    grad = np.asarray(storage.gradient(x), dtype=float)
    q = B.T @ grad + D.T @ c
    S = np.eye(base.p) + D.T @ D
    return float(grad @ np.asarray(base.a(x), dtype=float) + 0.5 * c @ c - 0.5 * q @ np.linalg.solve(S, q))


def hje_skr_residual(base: AffineSystem, storage: StorageFunction, x: np.ndarray) -> float:
    """V_x^T a + 1/2 |B^T V_x|^2 - 1/2 w^T R^-1 w with w = c + D B^T V_x and R = I + D D^T."""
    B, D, c = _sensitivities(base, x)
    grad = np.asarray(storage.gradient(x), dtype=float)
    bv = B.T @ grad
    w = c + D @ bv
    R = np.eye(base.m) + D @ D.T
    return float(grad @ np.asarray(base.a(x), dtype=float) + 0.5 * bv @ bv - 0.5 * w @ np.linalg.solve(R, w))


def gain_condition_residual(
    base: AffineSystem, storage: StorageFunction, L: Callable, x: np.ndarray
) -> float:
    """|V_x^T L - (c^T + V_x^T B D^T) R^-1|."""
    B, D, c = _sensitivities(base, x)
    grad = np.asarray(storage.gradient(x), dtype=float)
    R = np.eye(base.m) + D @ D.T
    target = np.linalg.solve(R, c + D @ (B.T @ grad))
    return float(np.linalg.norm(grad @ np.asarray(L(x), dtype=float) - target))


def storage_gradient_defect(storage: StorageFunction, probe: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest gap between the supplied gradient and central differences of the value."""
    def gap(x):
        numeric = fd_jacobian(lambda xi: np.array([storage.value(xi)]), x)[0]
        return float(np.max(np.abs(numeric - np.asarray(storage.gradient(x), dtype=float)), initial=0.0))

    return _worst(gap, probe)


# ==================== CONSTRUCTION ====================
def _check_invertible(evaluator, probe: np.ndarray, label: str, error):
    limit = settings.CONDITION_LIMIT

    def condition(x):
        matrix = np.atleast_2d(np.asarray(evaluator(x), dtype=float))
        if matrix.size == 0:
            return 1.0
        value = np.linalg.cond(matrix)
        return value if np.isfinite(value) else np.inf

    worst, point = _worst(condition, probe)
    if worst > limit:
        raise error(
            f"{label}(x) is singular on the probe grid",
            {"condition": worst, "worst_point": point.tolist()},
        )


def build_sir(
    base: AffineSystem, g: Callable, V: Callable, probe: Optional[np.ndarray] = None
) -> SirRealization:
    base.check_shapes()
    origin = np.zeros(base.n)
    if np.shape(g(origin)) != (base.p,) or np.shape(V(origin)) != (base.p, base.p):
        raise DimensionMismatch(
            "pre-filter shapes do not match the plant input",
            {"g": np.shape(g(origin)), "V": np.shape(V(origin)), "p": base.p},
        )
    probe = probe_points(base.n) if probe is None else probe
    _check_invertible(V, probe, "V", SingularV)
    return SirRealization(base=base, g=g, V=V)


def build_skr(
    base: AffineSystem, L: Callable, W: Callable, probe: Optional[np.ndarray] = None
) -> SkrRealization:
    base.check_shapes()
    origin = np.zeros(base.n)
    if np.shape(L(origin)) != (base.n, base.m) or np.shape(W(origin)) != (base.m, base.m):
        raise DimensionMismatch(
            "observer gain shapes do not match the plant output",
            {"L": np.shape(L(origin)), "W": np.shape(W(origin)), "m": base.m},
        )
    probe = probe_points(base.n) if probe is None else probe
    _check_invertible(W, probe, "W", SingularW)
    return SkrRealization(base=base, L=L, W=W)


def sir_prefilter(base: AffineSystem, storage: StorageFunction) -> tuple[Callable, Callable]:
    """Normalizing feedback g = -S^-1 (B^T P_x + D^T c) and V = S^-1/2."""
    identity = np.eye(base.p)

    def g(x):
        B, D, c = _sensitivities(base, x)
        S = identity + D.T @ D
        return -np.linalg.solve(S, B.T @ np.asarray(storage.gradient(x), dtype=float) + D.T @ c)

    def V(x):
        D = np.asarray(base.D(x), dtype=float)
        return inv_sqrt_sym(identity + D.T @ D)

    return g, V


def normalize_sir(
    base: AffineSystem,
    storage: StorageFunction,
    probe: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
) -> SirRealization:
    tolerance = settings.HJE_TOLERANCE if tolerance is None else tolerance
    probe = probe_points(base.n) if probe is None else probe
    worst, point = _worst(lambda x: abs(hje_sir_residual(base, storage, x)), probe)
    logger.debug("SIR HJE residual on %d probe states: %.3e", probe.shape[0], worst)
    if worst > tolerance:
        raise HjeResidualTooLarge(
            "storage does not solve the SIR Hamilton-Jacobi equation",
            {"max_residual": worst, "worst_point": point.tolist()},
        )
    g, V = sir_prefilter(base, storage)
    sir = build_sir(base, g, V, probe=probe)
    return replace(sir, normalized=True, storage=storage)


def normalize_skr(
    base: AffineSystem,
    storage: StorageFunction,
    L: Callable,
    probe: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
    gain_tolerance: Optional[float] = None,
) -> SkrRealization:
    tolerance = settings.HJE_TOLERANCE if tolerance is None else tolerance
    gain_tolerance = settings.GAIN_TOLERANCE if gain_tolerance is None else gain_tolerance
    probe = probe_points(base.n) if probe is None else probe

    worst, point = _worst(lambda x: abs(hje_skr_residual(base, storage, x)), probe)
    if worst > tolerance:
        raise HjeResidualTooLarge(
            "storage does not solve the SKR Hamilton-Jacobi equation",
            {"max_residual": worst, "worst_point": point.tolist()},
        )
    worst_gain, gain_point = _worst(lambda x: gain_condition_residual(base, storage, L, x), probe)
    logger.debug("SKR residuals: HJE %.3e, gain %.3e", worst, worst_gain)
    if worst_gain > gain_tolerance:
        raise GainConditionViolated(
            "observer gain does not satisfy the normalization condition",
            {"max_residual": worst_gain, "worst_point": gain_point.tolist()},
        )

    identity = np.eye(base.m)

    def W(x):
        D = np.asarray(base.D(x), dtype=float)
        return inv_sqrt_sym(identity + D @ D.T)

    skr = build_skr(base, L, W, probe=probe)
    return replace(skr, normalized=True, storage=storage)


# ==================== LTI FACTORS ====================
def lti_normalized_rcf(sys: LtiSystem) -> ControlFactors:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    S = np.eye(sys.p) + D.T @ D
    R = np.eye(sys.m) + D @ D.T
    A_c = A - B @ np.linalg.solve(S, D.T @ C)
    G = B @ np.linalg.solve(S, B.T)
    Q = C.T @ np.linalg.solve(R, C)
    X, iterations, residual = solve_care_kleinman(A_c, G, Q)
    F = -np.linalg.solve(S, B.T @ X + D.T @ C)
    logger.debug("control Riccati solved in %d iterations, residual %.3e", iterations, residual)
    return ControlFactors(X=X, F=F, V0=inv_sqrt_sym(S), residual=residual, iterations=iterations)


def lti_normalized_lcf(sys: LtiSystem) -> FilterFactors:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    S = np.eye(sys.p) + D.T @ D
    R = np.eye(sys.m) + D @ D.T
    A_f = A - B @ D.T @ np.linalg.solve(R, C)
    G = C.T @ np.linalg.solve(R, C)
    Q = B @ np.linalg.solve(S, B.T)
    Y, iterations, residual = solve_care_kleinman(A_f.T, G, Q)
    L0 = (Y @ C.T + B @ D.T) @ np.linalg.inv(R)
    logger.debug("filter Riccati solved in %d iterations, residual %.3e", iterations, residual)
    return FilterFactors(Y=Y, L0=L0, W0=inv_sqrt_sym(R), residual=residual, iterations=iterations)


def lti_factorize(sys: LtiSystem) -> LtiFactorization:
    return LtiFactorization.from_parts(lti_normalized_rcf(sys), lti_normalized_lcf(sys))


def riccati_residuals(sys: LtiSystem, fac: LtiFactorization) -> tuple[float, float]:
    """Frobenius residuals of the control and filter Riccati equations."""
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    S = np.eye(sys.p) + D.T @ D
    R = np.eye(sys.m) + D @ D.T
    A_c = A - B @ np.linalg.solve(S, D.T @ C)
    control = care_residual(A_c, B @ np.linalg.solve(S, B.T), C.T @ np.linalg.solve(R, C), fac.riccati_X)
    A_f = (A - B @ D.T @ np.linalg.solve(R, C)).T
    filter_ = care_residual(A_f, C.T @ np.linalg.solve(R, C), B @ np.linalg.solve(S, B.T), fac.riccati_Y)
    return float(np.linalg.norm(control, "fro")), float(np.linalg.norm(filter_, "fro"))


def lti_normalized_pair(
    sys: LtiSystem, name: str = "lti"
) -> tuple[SirRealization, SkrRealization, LtiFactorization]:
    """Normalized SIR and SKR of an LTI plant with quadratic storages.

    The SKR storage 1/2 x^T Y^-1 x is attached only when Y is invertible.
    """
    fac = lti_factorize(sys)
    base = lift_lti(sys, name=name)
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    X, F, V0 = fac.riccati_X, fac.F, fac.V0
    Y, L0, W0 = fac.riccati_Y, fac.L0, fac.W0

    sir_storage = StorageFunction(
        value=lambda x: 0.5 * float(x @ X @ x), gradient=lambda x: X @ x, name=f"{name}:P"
    )
    sir = SirRealization(
        base=base,
        g=lambda x: F @ x,
        V=lambda x: V0,
        normalized=True,
        storage=sir_storage,
        linearization=LtiSystem(
            A=A + B @ F, B=B @ V0, C=np.vstack([F, C + D @ F]), D=np.vstack([V0, D @ V0])
        ),
    )

    skr_storage = None
    if Y.size and np.linalg.cond(Y) < settings.CONDITION_LIMIT:
        Y_inv = np.linalg.inv(Y)
        Y_inv = 0.5 * (Y_inv + Y_inv.T)
        skr_storage = StorageFunction(
            value=lambda x: 0.5 * float(x @ Y_inv @ x), gradient=lambda x: Y_inv @ x, name=f"{name}:V"
        )
    skr = SkrRealization(
        base=base,
        L=lambda x: L0,
        W=lambda x: W0,
        normalized=True,
        storage=skr_storage,
        linearization=LtiSystem(
            A=A - L0 @ C, B=np.hstack([B - L0 @ D, L0]), C=-W0 @ C, D=np.hstack([-W0 @ D, W0])
        ),
    )
    return sir, skr, fac


# ==================== VERIFICATION ====================
def sir_transfer(sir: SirRealization) -> TransferEvaluator:
    """Transfer data of the SIR, exact when linear, else linearized at the origin."""
    if sir.linearization is not None:
        lin = sir.linearization
        return TransferEvaluator(A=lin.A, B=lin.B, C=lin.C, D=lin.D, name="I")
    origin = np.zeros(sir.n)
    return TransferEvaluator(
        A=fd_jacobian(sir.a_I, origin),
        B=sir.B_I(origin),
        C=fd_jacobian(sir.c_I, origin),
        D=sir.D_I(origin),
        name="I",
    )


def image_data(
    sir: SirRealization,
    v: LatentWindow,
    x0: Optional[np.ndarray] = None,
    hold: Optional[InputHold] = None,
) -> tuple[np.ndarray, SignalWindow]:
    """Simulate the SIR from latent ``v``; returns states and the generated (u, y) window."""
    states, out = simulate(sir.as_system(), v, x0, hold=hold)
    return states, SignalWindow.from_z(v.t0, v.dt, out.y, sir.p)


def verify_inner(
    sir: SirRealization,
    probe: Union[LatentWindow, Sequence[float], np.ndarray],
    x0: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
    hold: Optional[InputHold] = None,
) -> CheckRecord:
    """Inner property of a normalized SIR.

    Frequency probes check max |I(jw)^H I(jw) - I|_2; a latent window checks
    the lossless energy balance P(x(t1)) - P(x(t0)) = 1/2 int (v^T v - z^T z).
    """
    if not sir.normalized:
        raise NotNormalized("inner check needs a normalized SIR")

    if isinstance(probe, LatentWindow):
        if sir.storage is None:
            raise NotNormalized("energy balance needs the SIR storage function")
        tolerance = 1e-4 if tolerance is None else tolerance
        x0 = np.zeros(sir.n) if x0 is None else np.asarray(x0, dtype=float)
        states, data = image_data(sir, probe, x0, hold=hold)
        v = probe.samples
        supply = np.sum(v * v, axis=1) - np.sum(data.z * data.z, axis=1)
        flow = 0.5 * simpson(supply, dx=probe.dt) if probe.M > 1 else 0.0
        stored = sir.storage.value(states[-1]) - sir.storage.value(states[0])
        defect = abs(stored - flow)
        energy = 0.5 * simpson(np.sum(v * v, axis=1), dx=probe.dt) if probe.M > 1 else 0.0
        scale = max(energy, settings.ENERGY_FLOOR)
        return CheckRecord(
            name="inner:energy_balance",
            max_residual=float(defect),
            tolerance=tolerance * scale,
            passed=bool(defect <= tolerance * scale),
            detail=f"input energy {energy:.6g}",
        )

    tolerance = 1e-10 if tolerance is None else tolerance
    transfer = sir_transfer(sir)
    identity = np.eye(sir.p)
    worst, worst_omega = 0.0, None
    for omega in np.asarray(probe, dtype=float):
        response = transfer.response(omega)
        defect = np.linalg.norm(response.conj().T @ response - identity, 2)
        if defect >= worst:
            worst, worst_omega = float(defect), float(omega)
    return CheckRecord(
        name="inner:frequency",
        max_residual=worst,
        tolerance=tolerance,
        passed=bool(worst <= tolerance),
        worst_point=None if worst_omega is None else [worst_omega],
    )


def inner_conditions(sir: SirRealization, probe: Optional[np.ndarray] = None) -> list[CheckRecord]:
    """Pointwise inner conditions of a normalized SIR on the probe grid."""
    if not sir.normalized or sir.storage is None:
        raise NotNormalized("inner conditions need a normalized SIR with storage")
    probe = probe_points(sir.n) if probe is None else probe
    tolerance = settings.NORMALIZATION_TOLERANCE
    identity = np.eye(sir.p)
    grad = sir.storage.gradient

    checks = {
        "inner:feedthrough": lambda x: np.linalg.norm(sir.D_I(x).T @ sir.D_I(x) - identity, 2),
        "inner:cross_term": lambda x: np.linalg.norm(
            sir.c_I(x) @ sir.D_I(x) + np.asarray(grad(x), dtype=float) @ sir.B_I(x)
        ),
        "inner:lossless": lambda x: abs(
            float(np.asarray(grad(x), dtype=float) @ sir.a_I(x) + 0.5 * sir.c_I(x) @ sir.c_I(x))
        ),
    }
    records = []
    for name, residual in checks.items():
        worst, point = _worst(residual, probe)
        records.append(CheckRecord(
            name=name, max_residual=worst, tolerance=tolerance,
            passed=bool(worst <= tolerance), worst_point=point.tolist(),
        ))
    return records


def verify_coinner(skr: SkrRealization, probe: Optional[np.ndarray] = None) -> list[CheckRecord]:
    """Pointwise co-inner conditions of a normalized SKR on the probe grid."""
    if not skr.normalized:
        raise NotNormalized("co-inner check needs a normalized SKR")
    probe = probe_points(skr.n) if probe is None else probe
    tolerance = settings.NORMALIZATION_TOLERANCE
    identity = np.eye(skr.m)
    checks = {"coinner:feedthrough": lambda x: np.linalg.norm(skr.D_K(x) @ skr.D_K(x).T - identity, 2)}
    if skr.storage is not None:
        grad = skr.storage.gradient
        checks["coinner:cross_term"] = lambda x: np.linalg.norm(
            np.asarray(grad(x), dtype=float) @ skr.B_K(x) @ skr.D_K(x).T + skr.c_K(x)
        )

        def lossless(x):
            lam = np.asarray(grad(x), dtype=float)
            bk = skr.B_K(x).T @ lam
            return abs(float(lam @ skr.a_K(x) + 0.5 * bk @ bk))

        checks["coinner:lossless"] = lossless
    records = []
    for name, residual in checks.items():
        worst, point = _worst(residual, probe)
        records.append(CheckRecord(
            name=name, max_residual=worst, tolerance=tolerance,
            passed=bool(worst <= tolerance), worst_point=point.tolist(),
        ))
    return records


def cascade_residual(
    skr: SkrRealization,
    sir: SirRealization,
    v: LatentWindow,
    x0: Optional[np.ndarray] = None,
    xhat0: Optional[np.ndarray] = None,
    grid: Optional[Grid] = None,
    hold: Optional[InputHold] = None,
) -> np.ndarray:
    """Residual series (M x m) of the cascade SKR(SIR(v)), integrated as one system."""
    if (skr.n, skr.p, skr.m) != (sir.n, sir.p, sir.m):
        raise DimensionMismatch("SIR and SKR are built on different plants")
    if grid is not None and (grid.steps != v.M or abs(grid.dt - v.dt) > 1e-9 * v.dt):
        raise GridMismatch("latent samples do not lie on the requested grid", {"steps": grid.steps, "M": v.M})
    x0 = np.zeros(sir.n) if x0 is None else np.asarray(x0, dtype=float)
    xhat0 = x0 if xhat0 is None else np.asarray(xhat0, dtype=float)
    chain = cascade(sir.as_system(), skr.as_system())
    _, out = simulate(chain, v, np.concatenate([x0, xhat0]), hold=hold)
    return out.y


def verify_annihilation(
    skr: SkrRealization,
    sir: SirRealization,
    v: LatentWindow,
    x0: Optional[np.ndarray] = None,
    xhat0: Optional[np.ndarray] = None,
    grid: Optional[Grid] = None,
    hold: Optional[InputHold] = None,
) -> float:
    """Max residual norm over the cascaded run; zero for matched initial states."""
    residual = cascade_residual(skr, sir, v, x0=x0, xhat0=xhat0, grid=grid, hold=hold)
    return float(np.max(np.linalg.norm(residual, axis=1)))
