"""Bregman divergences, evaluation functions, thresholds and the detection decision."""
import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import xlogy

from app.config import settings
from app.core.factorization import image_data
from app.core.projection import hamiltonians_sir
from app.core.signals import half_energy, stack_samples
from app.errors import (
    AlphaOutOfRange, DimensionMismatch, EmptyWindow, FormulaDisagreement, GammaOutOfRange,
    LengthMismatch, MinimalityViolated, NotNormalized,
)
from app.models.divergence import GeneratingFunction, Verdict
from app.models.realizations import SirRealization
from app.models.results import SirProjectionResult, SkrProjectionResult
from app.models.signals import LatentWindow, SignalWindow, StackedVector
from app.models.systems import InputHold
from app.schemas.report import DetectionReport, MinimalityReport, Scheme

logger = logging.getLogger(__name__)

POINTWISE_TOLERANCE = 1e-9
STACKING_TOLERANCE = 1e-12
CANDIDATE_TONES = 5


# ==================== GENERATING FUNCTIONS ====================
def quadratic() -> GeneratingFunction:
    """phi(a) = 1/2 |a|^2, self-dual."""
    return GeneratingFunction(
        value=lambda a: 0.5 * float(np.dot(a, a)),
        gradient=lambda a: np.asarray(a, dtype=float),
        name="quadratic",
        convex=True,
        conjugate=lambda w: 0.5 * float(np.dot(w, w)),
    )


def negative_entropy() -> GeneratingFunction:
    """phi(a) = sum a_i ln a_i on the positive orthant; its divergence is KL on the simplex."""
    return GeneratingFunction(
        value=lambda a: float(np.sum(xlogy(a, a))),
        gradient=lambda a: np.log(np.asarray(a, dtype=float)) + 1.0,
        name="negative_entropy",
        convex=True,
        conjugate=lambda w: float(np.sum(np.exp(np.asarray(w, dtype=float) - 1.0))),
    )


def certify_convexity(
    phi: GeneratingFunction,
    dim: int,
    low: float = -2.0,
    high: float = 2.0,
    samples: int = 1000,
    seed: Optional[int] = None,
) -> GeneratingFunction:
    """Random midpoint test of convexity on the box [low, high]^dim; returns phi with the flag set."""
    rng = np.random.Generator(np.random.Philox(settings.PROBE_SEED if seed is None else seed))
    a = rng.uniform(low, high, size=(samples, dim))
    b = rng.uniform(low, high, size=(samples, dim))
    theta = rng.uniform(0.0, 1.0, size=samples)
    convex = True
    for ak, bk, tk in zip(a, b, theta):
        mixed = phi.value(tk * ak + (1.0 - tk) * bk)
        if mixed > tk * phi.value(ak) + (1.0 - tk) * phi.value(bk) + 1e-12:
            convex = False
            break
    logger.debug("convexity certificate for %s: %s", phi.name, convex)
    return replace(phi, convex=convex)


# ==================== DIVERGENCES ====================
def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch("divergence arguments differ in dimension", {"a": a.shape, "b": b.shape})
    return a, b


def bregman(phi: GeneratingFunction, a, b) -> float:
    """D_phi[a:b] = phi(a) - phi(b) - grad phi(b)^T (a - b)."""
    a, b = _pair(a, b)
    return float(phi.value(a) - phi.value(b) - np.asarray(phi.gradient(b), dtype=float) @ (a - b))


def dual_bregman(phi: GeneratingFunction, a, b) -> float:
    """Divergence of the Legendre dual, which is the primal divergence with the arguments swapped."""
    return bregman(phi, b, a)


def legendre_form(phi: GeneratingFunction, a, b) -> float:
    """phi(a) + phi^x(b^x) - a^T b^x with b^x = grad phi(b)."""
    if phi.conjugate is None:
        raise ValueError(f"{phi.name} has no closed-form conjugate")
    a, b = _pair(a, b)
    dual = np.asarray(phi.gradient(b), dtype=float)
    return float(phi.value(a) + phi.conjugate(dual) - a @ dual)


def pointwise_divergence(
    z: np.ndarray, zhat: np.ndarray, H: Optional[np.ndarray] = None
) -> np.ndarray:
    """D(k) = 1/2 |z(k) - zhat(k)|^2, cross-checked against H0(z(k)) - H(k).

    ``H`` defaults to the Hamiltonian recomputed from (z, zhat); passing the
    projector's own series checks the projector as well.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zhat = np.atleast_2d(np.asarray(zhat, dtype=float))
    if H is None:
        H, _ = hamiltonians_sir(z, zhat)
    elif z.shape != zhat.shape or len(H) != z.shape[0]:
        raise LengthMismatch("data, projection and Hamiltonian are not aligned")
    squared = np.sum(z * z, axis=1)
    gap = z - zhat
    direct = 0.5 * np.sum(gap * gap, axis=1)
    dual = 0.5 * squared - np.asarray(H, dtype=float)
    disagreement = np.abs(dual - direct)
    limit = POINTWISE_TOLERANCE * (1.0 + squared)
    if np.any(disagreement > limit):
        index = int(np.argmax(disagreement - limit))
        raise FormulaDisagreement(
            "divergence via the Hamiltonian disagrees with the squared distance",
            {"sample": index, "difference": float(disagreement[index])},
        )
    return direct


def stacked_divergence(zM: StackedVector, zhatM: StackedVector) -> float:
    """1/2 zM^T zM + 1/2 zhatM^T zhatM - zhatM^T zM."""
    return 0.5 * zM.norm_squared + 0.5 * zhatM.norm_squared - zhatM.dot(zM)


def evaluate_J_sir(window: SignalWindow, result: SirProjectionResult) -> float:
    if window.M < 1 or result.M < 1:
        raise EmptyWindow("evaluation window has no samples")
    if result.zhat.shape != window.z.shape:
        raise LengthMismatch("projection does not cover the evaluation window")
    zM = stack_samples(window.z, source="z")
    zhatM = stack_samples(result.zhat, source="zhat")
    J = stacked_divergence(zM, zhatM)
    mean = float(np.mean(pointwise_divergence(window.z, result.zhat, result.H)))
    if abs(J - mean) > STACKING_TOLERANCE * max(1.0, half_energy(zM)):
        raise FormulaDisagreement(
            "stacked evaluation function differs from the pointwise mean",
            {"stacked": J, "pointwise_mean": mean},
        )
    return max(J, 0.0)


def evaluate_J_skr(result: SkrProjectionResult) -> float:
    if result.M < 1:
        raise EmptyWindow("evaluation window has no samples")
    return half_energy(stack_samples(result.zdelta, source="zdelta"))


# ==================== THRESHOLDS AND DECISION ====================
def threshold_sir(gamma: float, zM: StackedVector) -> float:
    """J_th = 1/2 (1 - gamma) zM^T zM for a tolerated energy share gamma in [0.5, 1]."""
    if not 0.5 <= gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must lie in [0.5, 1], got {gamma}")
    return max(0.5 * (1.0 - gamma) * zM.norm_squared, settings.ENERGY_FLOOR)


def threshold_skr(alpha: float, zM: StackedVector) -> float:
    """J_th = alpha / 2 zM^T zM for alpha in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    return max(0.5 * alpha * zM.norm_squared, settings.ENERGY_FLOOR)


def decide(J: float, J_th: float) -> Verdict:
    return Verdict.FAULTY if J > J_th else Verdict.FAULT_FREE


def sir_detection_report(
    window: SignalWindow,
    result: SirProjectionResult,
    gamma: Optional[float] = None,
    window_index: int = 0,
) -> DetectionReport:
    gamma = settings.DEFAULT_GAMMA if gamma is None else gamma
    zM = stack_samples(window.z, source="z")
    energy = half_energy(zM)
    J = evaluate_J_sir(window, result)
    J_th = threshold_sir(gamma, zM)
    series = pointwise_divergence(window.z, result.zhat, result.H)

    squared = np.sum(window.z * window.z, axis=1)
    excess = result.H - 0.5 * squared
    clamped = int(np.count_nonzero(excess > STACKING_TOLERANCE * (1.0 + squared)))
    if clamped:
        logger.warning("window %d: Hamiltonian exceeds the data energy on %d samples", window_index, clamped)

    verdict = decide(J, J_th) if zM.norm_squared > 0.0 else Verdict.FAULT_FREE
    return DetectionReport(
        scheme=Scheme.SIR,
        window_index=window_index,
        t0=window.t0,
        t1=window.t1,
        M=window.M,
        J=J,
        J_th=J_th,
        gamma=gamma,
        verdict=verdict,
        energy=energy,
        energy_ratio=float(np.mean(result.H)) / energy if energy > 0.0 else None,
        clamped_samples=clamped,
        divergence_series=series.tolist(),
    )


def skr_detection_report(
    window: SignalWindow,
    result: SkrProjectionResult,
    alpha: Optional[float] = None,
    window_index: int = 0,
) -> DetectionReport:
    alpha = settings.DEFAULT_ALPHA if alpha is None else alpha
    zM = stack_samples(window.z, source="z")
    J = evaluate_J_skr(result)
    J_th = threshold_skr(alpha, zM)
    verdict = decide(J, J_th) if zM.norm_squared > 0.0 else Verdict.FAULT_FREE
    return DetectionReport(
        scheme=Scheme.SKR,
        window_index=window_index,
        t0=window.t0,
        t1=window.t1,
        M=window.M,
        J=J,
        J_th=J_th,
        alpha=alpha,
        verdict=verdict,
        energy=half_energy(zM),
        divergence_series=(0.5 * np.sum(result.zdelta * result.zdelta, axis=1)).tolist(),
    )


# ==================== GEODESIC MINIMALITY ====================
def candidate_latents(
    count: int, M: int, p: int, dt: float, rms: float, seed: Optional[int] = None
) -> np.ndarray:
    """``count`` latents (count x M x p), each a sum of random sinusoids scaled to ``rms``."""
    rng = np.random.Generator(np.random.Philox(settings.PROBE_SEED if seed is None else seed))
    times = dt * np.arange(M)
    horizon = max(dt * (M - 1), dt)
    latents = np.empty((count, M, p))
    for i in range(count):
        for j in range(p):
            cycles = rng.uniform(0.5, 10.0, size=CANDIDATE_TONES)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=CANDIDATE_TONES)
            weights = rng.normal(size=CANDIDATE_TONES)
            signal = np.sin(2.0 * np.pi * np.outer(times, cycles) / horizon + phases) @ weights
            spread = float(np.sqrt(np.mean(signal * signal)))
            latents[i, :, j] = signal * (rms / spread if spread > 0.0 else 0.0)
    return latents


def minimality_check(
    window: SignalWindow,
    result: SirProjectionResult,
    sir: SirRealization,
    n_candidates: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
    candidates: Optional[Sequence[np.ndarray]] = None,
    seed: Optional[int] = None,
    hold: Optional[InputHold] = None,
) -> MinimalityReport:
    """Compare D[z:zhat] with D[z:z0] for image-manifold candidates z0 = SIR(v0).

    Candidates default to random smooth latents; explicit ``candidates`` (each
    M x p) replace them.
    """
    if not sir.normalized:
        raise NotNormalized("minimality check needs a normalized SIR")
    zM = stack_samples(window.z, source="z")
    reference = stacked_divergence(zM, stack_samples(result.zhat, source="zhat"))
    scale = max(half_energy(zM), settings.ENERGY_FLOOR)

    if candidates is None:
        n_candidates = settings.MINIMALITY_CANDIDATES if n_candidates is None else n_candidates
        latent = result.latent_v
        rms = float(np.sqrt(np.mean(latent * latent))) if latent.size else 0.0
        if rms == 0.0:
            rms = float(np.sqrt(np.mean(window.z * window.z))) or 1.0
        candidates = candidate_latents(n_candidates, window.M, sir.p, window.dt, rms, seed=seed)

    margins = []
    for index, v0 in enumerate(candidates):
        latent_window = LatentWindow(t0=window.t0, dt=window.dt, samples=v0, kind="latent")
        _, z0 = image_data(sir, latent_window, x0, hold=hold)
        distance = stacked_divergence(zM, stack_samples(z0.z, source="z0"))
        margin = distance - reference
        margins.append(float(margin))
        if margin < -1e-8 * scale:
            raise MinimalityViolated(
                "an image-manifold candidate lies closer to the data than the projection",
                {"candidate": index, "margin": float(margin), "reference": reference},
            )

    logger.debug("minimality: %d candidates, smallest margin %.3e", len(margins), min(margins, default=0.0))
    return MinimalityReport(
        n_candidates=len(margins),
        violations=0,
        reference_divergence=reference,
        min_margin=min(margins, default=0.0),
        margins=margins,
        passed=True,
    )
