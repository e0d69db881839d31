"""Exact LTI reference: normalized factors as transfer data, orthogonal projection and its identities."""
import logging
from typing import Optional

import numpy as np

from app.config import settings
from app.core.factorization import lti_factorize
from app.core.signals import stack_samples
from app.core.systems import integrate, integrate_backward
from app.errors import DimensionMismatch, LengthMismatch
from app.models.realizations import LtiFactorization
from app.models.signals import SignalWindow
from app.models.systems import InputHold, LtiSystem
from app.models.transfer import TransferEvaluator

logger = logging.getLogger(__name__)


def assemble_factors(
    fac: LtiFactorization, sys: LtiSystem
) -> tuple[TransferEvaluator, TransferEvaluator]:
    """I0 = (M0; N0) from (F, V0) and the residual generator K0 from (L0, W0)."""
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    F, V0, L0, W0 = fac.F, fac.V0, fac.L0, fac.W0
    image = TransferEvaluator(
        A=A + B @ F,
        B=B @ V0,
        C=np.vstack([F, C + D @ F]),
        D=np.vstack([V0, D @ V0]),
        name="I0",
    )
    kernel = TransferEvaluator(
        A=A - L0 @ C,
        B=np.hstack([B - L0 @ D, L0]),
        C=-W0 @ C,
        D=np.hstack([-W0 @ D, W0]),
        name="K0",
    )
    return image, kernel


def probe_frequencies(
    count: Optional[int] = None, low: Optional[float] = None, high: Optional[float] = None
) -> np.ndarray:
    count = settings.PROBE_FREQUENCY_COUNT if count is None else count
    low = settings.PROBE_FREQUENCY_MIN if low is None else low
    high = settings.PROBE_FREQUENCY_MAX if high is None else high
    return np.logspace(np.log10(low), np.log10(high), count)


def simulate_transfer(
    G: TransferEvaluator,
    inputs: np.ndarray,
    dt: float,
    hold: Optional[InputHold] = None,
    t0: float = 0.0,
) -> np.ndarray:
    """Time response of G on a sampled input, zero initial (or terminal, if anti-causal) state."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, 1)
    if inputs.shape[1] != G.inputs:
        raise DimensionMismatch(f"{G.name} takes {G.inputs} inputs", {"given": inputs.shape[1]})
    A, B, C, D = G.A, G.B, G.C, G.D

    def rhs(x, u):
        return A @ x + B @ u

    if G.anti_causal:
        states = integrate_backward(rhs, np.zeros(G.n), inputs, dt, hold=hold, t0=t0)
    else:
        states = integrate(rhs, np.zeros(G.n), inputs, dt, hold=hold, t0=t0)
    return states @ C.T + inputs @ D.T


def orthogonal_project(
    I0: TransferEvaluator, window: SignalWindow, hold: Optional[InputHold] = None
) -> SignalWindow:
    """I0 I0~ applied to the window: anti-causal pass of the conjugate, then I0 forward."""
    latent = simulate_transfer(I0.conjugate(), window.z, window.dt, hold=hold, t0=window.t0)
    projected = simulate_transfer(I0, latent, window.dt, hold=hold, t0=window.t0)
    return SignalWindow.from_z(window.t0, window.dt, projected, window.p)


def frequency_projector(I0: TransferEvaluator, omega: float) -> np.ndarray:
    response = I0.response(omega)
    return response @ response.conj().T


def inner_defects(
    I0: TransferEvaluator, K0: TransferEvaluator, omegas: Optional[np.ndarray] = None
) -> tuple[float, float]:
    """max |I0^H I0 - I|_2 and max |K0 K0^H - I|_2 over the probe frequencies."""
    omegas = probe_frequencies() if omegas is None else omegas
    inner, coinner = 0.0, 0.0
    for omega in omegas:
        image = I0.response(omega)
        kernel = K0.response(omega)
        inner = max(inner, np.linalg.norm(image.conj().T @ image - np.eye(I0.inputs), 2))
        coinner = max(coinner, np.linalg.norm(kernel @ kernel.conj().T - np.eye(K0.outputs), 2))
    return float(inner), float(coinner)


def block_identity_defect(
    I0: TransferEvaluator, K0: TransferEvaluator, omegas: Optional[np.ndarray] = None
) -> float:
    """[K0; I0~] [I0, K0~] = [[0, I], [I, 0]] at the probe frequencies."""
    omegas = probe_frequencies(20) if omegas is None else omegas
    p, m = I0.inputs, K0.outputs
    target = np.block([
        [np.zeros((m, p)), np.eye(m)],
        [np.eye(p), np.zeros((p, m))],
    ])
    worst = 0.0
    for omega in omegas:
        image = I0.response(omega)
        kernel = K0.response(omega)
        block = np.vstack([kernel, image.conj().T]) @ np.hstack([image, kernel.conj().T])
        worst = max(worst, float(np.linalg.norm(block - target, 2)))
    return worst


def pythagoras_check(window: SignalWindow, projected: SignalWindow) -> float:
    """| |z|^2 - |zhat|^2 - |z - zhat|^2 | / |z|^2 over the stacked window."""
    if window.z.shape != projected.z.shape:
        raise LengthMismatch("projection does not cover the window")
    zM = stack_samples(window.z)
    zhatM = stack_samples(projected.z)
    gapM = stack_samples(window.z - projected.z)
    defect = abs(zM.norm_squared - zhatM.norm_squared - gapM.norm_squared)
    return float(defect / max(zM.norm_squared, settings.ENERGY_FLOOR))


def observer_equivalence_check(
    sys: LtiSystem,
    fac: Optional[LtiFactorization],
    window: SignalWindow,
    projected: Optional[SignalWindow] = None,
    burn_in: int = 0,
    hold: Optional[InputHold] = None,
) -> float:
    """| |z - zhat| - |r_y| | / |z| with r_y from the normalized observer K0.

    Samples before ``burn_in`` are excluded from both norms.
    """
    fac = lti_factorize(sys) if fac is None else fac
    I0, K0 = assemble_factors(fac, sys)
    if projected is None:
        projected = orthogonal_project(I0, window, hold=hold)
    residual = simulate_transfer(K0, window.z, window.dt, hold=hold, t0=window.t0)
    gap = (window.z - projected.z)[burn_in:]
    gap_norm = np.sqrt(stack_samples(gap).norm_squared)
    residual_norm = np.sqrt(stack_samples(residual[burn_in:]).norm_squared)
    scale = np.sqrt(max(stack_samples(window.z[burn_in:]).norm_squared, settings.ENERGY_FLOOR))
    logger.debug("observer equivalence: |z - zhat| %.6g, |r_y| %.6g", gap_norm, residual_norm)
    return float(abs(gap_norm - residual_norm) / scale)
