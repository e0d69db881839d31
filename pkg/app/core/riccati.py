"""Kleinman-Newton solver for A^T X + X A - X G X + Q = 0."""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from app.config import settings
from app.core.systems import spectral_abscissa
from app.errors import RiccatiNoStabilizingSolution, RiccatiNotConverged

logger = logging.getLogger(__name__)


def care_residual(A: np.ndarray, G: np.ndarray, Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    return A.T @ X + X @ A - X @ G @ X + Q


def _stabilizing_start(A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Initial X0 with A - G X0 Hurwitz, by shifting the spectrum of A (Bass)."""
    n = A.shape[0]
    abscissa = spectral_abscissa(A)
    if abscissa < 0:
        return np.zeros((n, n))

    shift = abscissa + 1.0
    shifted = A + shift * np.eye(n)
    # (A + bI) Z + Z (A + bI)^T = 2G has Z > 0 when the pair is controllable
    Z = solve_continuous_lyapunov(shifted, 2.0 * G)
    Z = 0.5 * (Z + Z.T)
    X0 = np.linalg.pinv(Z, hermitian=True)
    if spectral_abscissa(A - G @ X0) >= 0:
        raise RiccatiNoStabilizingSolution(
            "no stabilizing initial gain found; the pair is not stabilizable",
            {"open_loop_abscissa": abscissa},
        )
    return 0.5 * (X0 + X0.T)


def solve_care_kleinman(
    A: np.ndarray,
    G: np.ndarray,
    Q: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> tuple[np.ndarray, int, float]:
    """Stabilizing solution of A^T X + X A - X G X + Q = 0.

    Each Newton step solves the Lyapunov equation
    (A - G X_k)^T X_{k+1} + X_{k+1} (A - G X_k) = -(Q + X_k G X_k).
    Returns (X, iterations, residual Frobenius norm).
    """
    tol = settings.RICCATI_TOLERANCE if tol is None else tol
    max_iter = settings.RICCATI_MAX_ITER if max_iter is None else max_iter
    A = np.atleast_2d(np.asarray(A, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))

    X = _stabilizing_start(A, G)
    residual = np.linalg.norm(care_residual(A, G, Q, X), "fro")
    iterations = 0
    while residual >= tol * (1.0 + np.linalg.norm(X, "fro")):
        if iterations >= max_iter:
            raise RiccatiNotConverged(
                "Kleinman-Newton iteration did not converge",
                {"iterations": iterations, "residual": float(residual)},
            )
        closed = A - G @ X
        if spectral_abscissa(closed) >= 0:
            raise RiccatiNoStabilizingSolution(
                "Newton iterate lost closed-loop stability", {"iteration": iterations}
            )
        X_next = solve_continuous_lyapunov(closed.T, -(Q + X @ G @ X))
        X_next = 0.5 * (X_next + X_next.T)
        iterations += 1
        residual_next = np.linalg.norm(care_residual(A, G, Q, X_next), "fro")
        logger.debug("kleinman iteration %d: residual %.3e", iterations, residual_next)
        if not np.isfinite(residual_next):
            raise RiccatiNoStabilizingSolution("Newton iterate is not finite", {"iteration": iterations})
        # rounding floor: the iterate stopped improving
        if residual_next >= residual and residual <= 1e-10 * (1.0 + np.linalg.norm(X, "fro")):
            break
        X, residual = X_next, residual_next

    if spectral_abscissa(A - G @ X) >= 0:
        raise RiccatiNoStabilizingSolution(
            "converged solution is not stabilizing", {"abscissa": spectral_abscissa(A - G @ X)}
        )
    floor = -1e-10 * (1.0 + np.linalg.norm(X, "fro"))
    if X.size and np.min(np.linalg.eigvalsh(X)) < floor:
        raise RiccatiNoStabilizingSolution("Riccati solution is not positive semidefinite")
    return X, iterations, float(residual)
