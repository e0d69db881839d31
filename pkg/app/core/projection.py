"""Hamiltonian projection systems built on the SIR and the SKR.

The SIR projection maps data z = (u; y) onto the image manifold; the SKR
projection maps it onto the manifold of uncertain data through the adjoint
of the residual generator.
"""
import logging
from typing import Optional, Union

import numpy as np

from app.config import settings
from app.core.systems import fd_jacobian, integrate, integrate_backward
from app.errors import DimensionMismatch, GridMismatch, LengthMismatch, NotNormalized
from app.models.realizations import SirRealization, SkrRealization
from app.models.results import SirCostate, SirProjectionResult, SkrCostate, SkrProjectionResult
from app.models.signals import LatentWindow, SignalWindow
from app.models.systems import InputHold

logger = logging.getLogger(__name__)


def _initial_state(n: int, x0: Optional[np.ndarray]) -> np.ndarray:
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise DimensionMismatch("initial state has the wrong dimension", {"expected": n, "given": x0.size})
    return x0


def _check_data(realization, data: SignalWindow):
    if data.p != realization.p or data.m != realization.m:
        raise DimensionMismatch(
            "data channels do not match the plant",
            {"p": data.p, "m": data.m, "plant_p": realization.p, "plant_m": realization.m},
        )


# ==================== HAMILTONIANS ====================
def hamiltonians_sir(z: np.ndarray, zhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """H = zhat^T z - 1/2 zhat^T zhat and H^x = 1/2 zhat^T zhat per sample."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zhat = np.atleast_2d(np.asarray(zhat, dtype=float))
    if z.shape != zhat.shape:
        raise LengthMismatch("data and projection are not aligned", {"z": z.shape, "zhat": zhat.shape})
    dual = 0.5 * np.sum(zhat * zhat, axis=1)
    return np.sum(zhat * z, axis=1) - dual, dual


def sir_hamiltonian(sir: SirRealization, x: np.ndarray, lam: np.ndarray, z: np.ndarray) -> float:
    """1/2 z^T D_I D_I^T z + c_I^T z + lam^T (a_I + 1/2 B_I B_I^T lam + B_I D_I^T z)."""
    D_I = sir.D_I(x)
    B_I = sir.B_I(x)
    dz = D_I.T @ z
    drift = sir.a_I(x) + 0.5 * B_I @ (B_I.T @ lam) + B_I @ dz
    return float(0.5 * dz @ dz + sir.c_I(x) @ z + lam @ drift)


def hamiltonians_skr(
    skr: SkrRealization,
    state_xhat: np.ndarray,
    z: np.ndarray,
    residual: np.ndarray,
    costate: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Direct, Legendre and dual forms of the SKR Hamiltonian per sample.

    direct   = 1/2 |r|^2 + lam^T (a_K + B_K z)
    legendre = zdelta^T z - 1/2 |zdelta|^2
    dual     = 1/2 |zdelta|^2
    with zdelta = B_K^T lam + D_K^T r and lam = V_x(xhat) unless given.
    """
    if costate is None:
        if skr.storage is None:
            raise NotNormalized("stationary co-state needs the SKR storage function")
        costate = np.array([skr.storage.gradient(x) for x in state_xhat])
    direct, legendre, dual = [], [], []
    for x, lam, zk, rk in zip(state_xhat, costate, z, residual):
        zdelta = skr.B_K(x).T @ lam + skr.D_K(x).T @ rk
        direct.append(0.5 * rk @ rk + lam @ (skr.a_K(x) + skr.B_K(x) @ zk))
        legendre.append(zdelta @ zk - 0.5 * zdelta @ zdelta)
        dual.append(0.5 * zdelta @ zdelta)
    return np.array(direct), np.array(legendre), np.array(dual)


# ==================== SIR PROJECTION ====================
def _sir_algebraic(sir: SirRealization, z: np.ndarray, x0: np.ndarray, dt: float, hold, t0: float):
    gradient = sir.storage.gradient

    def rhs(x, zk):
        B_I = sir.B_I(x)
        return sir.a_I(x) + B_I @ (B_I.T @ np.asarray(gradient(x), dtype=float) + sir.D_I(x).T @ zk)

    states = integrate(rhs, x0, z, dt, hold=hold, t0=t0)
    latent = np.array([
        sir.B_I(x).T @ np.asarray(gradient(x), dtype=float) + sir.D_I(x).T @ zk
        for x, zk in zip(states, z)
    ])
    return states, latent.reshape(z.shape[0], sir.p)


def _sir_adjoint(
    sir: SirRealization, z: np.ndarray, x0: np.ndarray, dt: float, hold, t0: float,
    states: np.ndarray, latent: np.ndarray,
):
    system = sir.as_system()
    n, width = sir.n, z.shape[1]
    tolerance = settings.SWEEP_TOLERANCE

    def costate_rhs(lam, drive):
        zk, xk, vk = drive[:width], drive[width : width + n], drive[width + n :]
        state_jac, output_jac = system.jacobians(xk, vk)
        return -state_jac.T @ lam - output_jac.T @ zk

    sweeps = 0
    for sweeps in range(1, settings.SWEEP_MAX_ITER + 1):
        drive = np.hstack([z, states, latent])
        lam = integrate_backward(costate_rhs, np.zeros(n), drive, dt, hold=hold, t0=t0)
        updated = np.array([
            sir.B_I(x).T @ lk + sir.D_I(x).T @ zk for x, lk, zk in zip(states, lam, z)
        ]).reshape(latent.shape)
        change = float(np.max(np.abs(updated - latent), initial=0.0))
        latent = updated
        states = integrate(system.f, x0, latent, dt, hold=hold, t0=t0)
        logger.debug("adjoint sweep %d: latent change %.3e", sweeps, change)
        if change <= tolerance * (1.0 + float(np.max(np.abs(latent), initial=0.0))):
            break
    else:
        logger.warning("SIR adjoint sweep stopped after %d passes without settling", sweeps)
    return states, latent, sweeps


def sir_project(
    sir: SirRealization,
    data: SignalWindow,
    x0: Optional[np.ndarray] = None,
    costate: SirCostate = SirCostate.ALGEBRAIC,
    hold: Optional[InputHold] = None,
) -> SirProjectionResult:
    """Project data onto the image manifold of a normalized SIR.

    ``algebraic`` closes the co-state as lam = P_x(x) and runs one causal
    forward pass. ``adjoint`` integrates the co-state backward from
    lam(t1) = 0 and repeats forward/backward passes until the latent settles.
    """
    if not sir.normalized:
        raise NotNormalized("SIR projection needs a normalized SIR")
    _check_data(sir, data)
    costate = SirCostate(costate)
    x0 = _initial_state(sir.n, x0)
    z = data.z

    if sir.storage is not None:
        states, latent = _sir_algebraic(sir, z, x0, data.dt, hold, data.t0)
    elif costate is SirCostate.ALGEBRAIC:
        raise NotNormalized("algebraic co-state closure needs the SIR storage function")
    else:
        latent = np.zeros((data.M, sir.p))
        states = integrate(sir.as_system().f, x0, latent, data.dt, hold=hold, t0=data.t0)

    sweeps = 0
    if costate is SirCostate.ADJOINT:
        states, latent, sweeps = _sir_adjoint(sir, z, x0, data.dt, hold, data.t0, states, latent)

    zhat = np.array([sir.c_I(x) + sir.D_I(x) @ vk for x, vk in zip(states, latent)]).reshape(z.shape)
    H, Hdual = hamiltonians_sir(z, zhat)
    return SirProjectionResult(
        t0=data.t0,
        dt=data.dt,
        p=sir.p,
        zhat=zhat,
        latent_v=latent,
        state_x=states,
        H=H,
        Hdual=Hdual,
        costate=costate,
        sweeps=sweeps,
    )


def legendre_consistency_check(result: SirProjectionResult, data: SignalWindow) -> float:
    """max_k |H(k) + H^x(k) - zhat(k)^T z(k)|."""
    z = data.z
    if z.shape != result.zhat.shape:
        raise LengthMismatch("projection and data are not aligned")
    pairing = np.sum(result.zhat * z, axis=1)
    return float(np.max(np.abs(result.H + result.Hdual - pairing), initial=0.0))


def costate_closure_defect(
    sir: SirRealization, data: SignalWindow, result: SirProjectionResult
) -> float:
    """Relative gap between d/dt P_x(x(t)) and -dH/dx(x, P_x(x), z) along a projection run.

    Derivatives of the co-state use second-order differences; the end samples
    are excluded.
    """
    if sir.storage is None:
        raise NotNormalized("co-state closure needs the SIR storage function")
    if result.M < 3:
        return 0.0
    states, z = result.state_x, data.z
    lam = np.array([np.asarray(sir.storage.gradient(x), dtype=float) for x in states])
    lam_dot = np.gradient(lam, data.dt, axis=0)

    expected = np.empty_like(lam)
    for k, (x, lk, zk) in enumerate(zip(states, lam, z)):
        expected[k] = -fd_jacobian(lambda xi: np.array([sir_hamiltonian(sir, xi, lk, zk)]), x)[0]

    gap = np.linalg.norm(lam_dot[1:-1] - expected[1:-1], axis=1)
    scale = max(float(np.max(np.linalg.norm(expected[1:-1], axis=1))), settings.ENERGY_FLOOR)
    return float(np.max(gap) / scale)


# ==================== SKR PROJECTION ====================
def _residual_samples(residual: Union[LatentWindow, np.ndarray]) -> np.ndarray:
    if isinstance(residual, LatentWindow):
        return residual.samples
    r = np.asarray(residual, dtype=float)
    return r.reshape(-1, 1) if r.ndim == 1 else r


def skr_forward(
    skr: SkrRealization,
    data: SignalWindow,
    xhat0: Optional[np.ndarray] = None,
    hold: Optional[InputHold] = None,
) -> tuple[LatentWindow, np.ndarray]:
    """Run the residual generator; returns r_y and the observer state trajectory."""
    _check_data(skr, data)
    xhat0 = _initial_state(skr.n, xhat0)
    z = data.z
    states = integrate(
        lambda x, zk: skr.a_K(x) + skr.B_K(x) @ zk, xhat0, z, data.dt, hold=hold, t0=data.t0
    )
    residual = np.array([skr.c_K(x) + skr.D_K(x) @ zk for x, zk in zip(states, z)])
    residual = residual.reshape(data.M, skr.m)
    return LatentWindow(t0=data.t0, dt=data.dt, samples=residual, kind="residual"), states


def skr_costate(
    skr: SkrRealization,
    residual: Union[LatentWindow, np.ndarray],
    state_xhat: np.ndarray,
    data: SignalWindow,
    costate: SkrCostate = SkrCostate.ADJOINT,
    hold: Optional[InputHold] = None,
) -> np.ndarray:
    """Co-state of the SKR Hamiltonian system on the data grid."""
    r = _residual_samples(residual)
    state_xhat = np.asarray(state_xhat, dtype=float)
    if r.shape[0] != data.M or state_xhat.shape[0] != data.M:
        raise GridMismatch(
            "residual, observer states and data lie on different grids",
            {"residual": r.shape[0], "states": state_xhat.shape[0], "data": data.M},
        )
    costate = SkrCostate(costate)
    if costate is SkrCostate.STATIONARY:
        if skr.storage is None:
            raise NotNormalized("stationary co-state needs the SKR storage function")
        return np.array([np.asarray(skr.storage.gradient(x), dtype=float) for x in state_xhat]).reshape(
            data.M, skr.n
        )

    system = skr.as_system()
    z = data.z
    width, m = z.shape[1], skr.m

    def rhs(lam, drive):
        zk, rk, xk = drive[:width], drive[width : width + m], drive[width + m :]
        state_jac, output_jac = system.jacobians(xk, zk)
        return -state_jac.T @ lam - output_jac.T @ rk

    return integrate_backward(
        rhs, np.zeros(skr.n), np.hstack([z, r, state_xhat]), data.dt, hold=hold, t0=data.t0
    )


def skr_estimate(skr: SkrRealization, state_xhat, lam, r) -> np.ndarray:
    """zdelta(k) = B_K^T(xhat(k)) lam(k) + D_K^T(xhat(k)) r_y(k)."""
    return np.array([
        skr.B_K(x).T @ lk + skr.D_K(x).T @ rk for x, lk, rk in zip(state_xhat, lam, r)
    ]).reshape(len(r), skr.p + skr.m)


def skr_adjoint(
    skr: SkrRealization,
    residual: Union[LatentWindow, np.ndarray],
    state_xhat: np.ndarray,
    data: SignalWindow,
    costate: SkrCostate = SkrCostate.ADJOINT,
    hold: Optional[InputHold] = None,
) -> np.ndarray:
    """Backward co-state pass over the window followed by the estimate."""
    lam = skr_costate(skr, residual, state_xhat, data, costate=costate, hold=hold)
    r = _residual_samples(residual)
    return skr_estimate(skr, state_xhat, lam, r)


def skr_project(
    skr: SkrRealization,
    data: SignalWindow,
    xhat0: Optional[np.ndarray] = None,
    costate: SkrCostate = SkrCostate.ADJOINT,
    hold: Optional[InputHold] = None,
) -> SkrProjectionResult:
    if not skr.normalized:
        raise NotNormalized("SKR projection needs a normalized SKR")
    residual, states = skr_forward(skr, data, xhat0, hold=hold)
    lam = skr_costate(skr, residual, states, data, costate=costate, hold=hold)
    return SkrProjectionResult(
        t0=data.t0,
        dt=data.dt,
        p=skr.p,
        zdelta=skr_estimate(skr, states, lam, residual.samples),
        residual_r=residual.samples,
        costate=lam,
        state_xhat=states,
        mode=SkrCostate(costate),
    )
