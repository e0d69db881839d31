"""Plant models, fixed-step RK4 simulation and finite-difference Jacobians."""
import logging
from typing import Callable, Optional, Union

import numpy as np

from app.config import settings
from app.errors import DimensionMismatch, GridMismatch, IntegrationDiverged, NonFiniteValue
from app.models.signals import LatentWindow, SignalWindow
from app.models.systems import AffineSystem, Grid, InputHold, LtiSystem

logger = logging.getLogger(__name__)

RightHandSide = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ==================== JACOBIANS ====================
def fd_jacobian(
    f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: Optional[float] = None
) -> np.ndarray:
    """Central-difference Jacobian; column j is (f(x + h e_j) - f(x - h e_j)) / 2h.

    Without an explicit ``h`` each coordinate uses max(1e-6, 1e-6 |x_j|).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    columns = []
    for j in range(x.size):
        step = h if h is not None else max(1e-6, 1e-6 * abs(x[j]))
        original = x[j]
        x[j] = original + step
        forward = np.atleast_1d(np.asarray(f(x), dtype=float))
        x[j] = original - step
        backward = np.atleast_1d(np.asarray(f(x), dtype=float))
        x[j] = original
        columns.append((forward - backward) / (2.0 * step))
    jacobian = np.column_stack(columns) if columns else np.zeros((0, 0))
    if not np.all(np.isfinite(jacobian)):
        raise NonFiniteValue("finite-difference Jacobian is not finite", {"x": x.tolist()})
    return jacobian


def spectral_abscissa(A: np.ndarray) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


# ==================== INPUT RECONSTRUCTION ====================
def stage_samples(drive: np.ndarray, hold: InputHold) -> tuple[np.ndarray, np.ndarray]:
    """Drive values at the RK4 midpoint and end stages of every step.

    Returns two (M-1) x k arrays. Cubic uses 4-point Lagrange interpolation,
    one-sided at both ends of the window.
    """
    hold = InputHold(hold)
    count = drive.shape[0]
    if count < 2:
        empty = np.zeros((0, drive.shape[1]))
        return empty, empty
    if hold is InputHold.ZOH:
        return drive[:-1], drive[:-1]
    end = drive[1:]
    if hold is InputHold.LINEAR or count < 4:
        return 0.5 * (drive[:-1] + drive[1:]), end

    mid = np.empty((count - 1, drive.shape[1]))
    mid[1:-1] = (-drive[:-3] + 9.0 * drive[1:-2] + 9.0 * drive[2:-1] - drive[3:]) / 16.0
    mid[0] = (5.0 * drive[0] + 15.0 * drive[1] - 5.0 * drive[2] + drive[3]) / 16.0
    mid[-1] = (drive[-4] - 5.0 * drive[-3] + 15.0 * drive[-2] + 5.0 * drive[-1]) / 16.0
    return mid, end


# ==================== INTEGRATION ====================
def integrate(
    rhs: RightHandSide,
    x0: np.ndarray,
    drive: np.ndarray,
    dt: float,
    hold: Optional[InputHold] = None,
    t0: float = 0.0,
) -> np.ndarray:
    """Classical RK4 over the sample grid of ``drive``; returns M x n states."""
    hold = InputHold(hold or settings.INPUT_HOLD)
    drive = np.asarray(drive, dtype=float)
    if drive.ndim == 1:
        drive = drive.reshape(-1, 1)
    x = np.array(x0, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("initial state is not finite", {"x0": x.tolist()})

    count = drive.shape[0]
    states = np.empty((count, x.size))
    states[0] = x
    mid, end = stage_samples(drive, hold)
    limit = settings.DIVERGENCE_LIMIT
    half = 0.5 * dt

    for k in range(count - 1):
        k1 = rhs(x, drive[k])
        k2 = rhs(x + half * k1, mid[k])
        k3 = rhs(x + half * k2, mid[k])
        k4 = rhs(x + dt * k3, end[k])
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > limit:
            raise IntegrationDiverged(
                "state left the divergence guard", {"step": k + 1, "t": t0 + (k + 1) * dt}
            )
        states[k + 1] = x
    return states


def integrate_backward(
    rhs: RightHandSide,
    terminal: np.ndarray,
    drive: np.ndarray,
    dt: float,
    hold: Optional[InputHold] = None,
    t0: float = 0.0,
) -> np.ndarray:
    """Integrate dx/dt = rhs(x, d) backward from x(t1) = ``terminal``.

    The reversed-time system is integrated forward, then flipped back so the
    result is aligned with the original grid.
    """
    drive = np.asarray(drive, dtype=float)
    if drive.ndim == 1:
        drive = drive.reshape(-1, 1)
    t1 = t0 + (drive.shape[0] - 1) * dt
    reversed_states = integrate(
        lambda x, d: -rhs(x, d), terminal, drive[::-1], dt, hold=hold, t0=-t1
    )
    return reversed_states[::-1]


def _input_samples(inputs: Union[SignalWindow, LatentWindow]) -> np.ndarray:
    if isinstance(inputs, SignalWindow):
        return inputs.u
    if isinstance(inputs, LatentWindow):
        return inputs.samples
    raise TypeError(f"unsupported input container {type(inputs).__name__}")


def check_grid(window: Union[SignalWindow, LatentWindow], grid: Grid):
    if (
        grid.steps != window.M
        or abs(grid.dt - window.dt) > 1e-9 * window.dt
        or abs(grid.t0 - window.t0) > 1e-9 * max(1.0, abs(window.t0))
    ):
        raise GridMismatch(
            "input samples do not lie on the requested grid",
            {"samples": window.M, "steps": grid.steps, "dt": window.dt, "grid_dt": grid.dt},
        )


def simulate(
    system: AffineSystem,
    inputs: Union[SignalWindow, LatentWindow],
    x0: np.ndarray,
    grid: Optional[Grid] = None,
    hold: Optional[InputHold] = None,
) -> tuple[np.ndarray, SignalWindow]:
    """Simulate ``system`` on the input grid.

    Returns the M x n state trajectory and a window holding the input samples
    and the outputs y(k) = c(x(k)) + D(x(k)) u(k).
    """
    if grid is not None:
        check_grid(inputs, grid)
    samples = _input_samples(inputs)
    if samples.shape[1] != system.p:
        raise DimensionMismatch(
            f"{system.name} expects {system.p} inputs", {"given": samples.shape[1]}
        )
    x0 = np.zeros(system.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.size != system.n:
        raise DimensionMismatch(f"{system.name} has {system.n} states", {"x0": x0.size})

    states = integrate(system.f, x0, samples, inputs.dt, hold=hold, t0=inputs.t0)
    outputs = np.array([system.h(states[k], samples[k]) for k in range(samples.shape[0])])
    outputs = outputs.reshape(samples.shape[0], system.m)
    return states, SignalWindow(t0=inputs.t0, dt=inputs.dt, u=samples, y=outputs)


# ==================== PLANT CONSTRUCTION ====================
def lift_lti(sys: LtiSystem, name: str = "lti") -> AffineSystem:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    zero_b = np.zeros((sys.n, sys.n))
    zero_d = np.zeros((sys.m, sys.n))
    return AffineSystem(
        n=sys.n,
        p=sys.p,
        m=sys.m,
        a=lambda x: A @ x,
        B=lambda x: B,
        c=lambda x: C @ x,
        D=lambda x: D,
        jac_a=lambda x: A,
        jac_c=lambda x: C,
        dB=lambda x, u: zero_b,
        dD=lambda x, u: zero_d,
        name=name,
    )


def cascade(first: AffineSystem, second: AffineSystem) -> AffineSystem:
    """Series interconnection: the output of ``first`` drives ``second``.

    The combined state is (x1; x2) and the result is again input-affine.
    """
    if second.p != first.m:
        raise DimensionMismatch(
            f"{second.name} takes {second.p} inputs but {first.name} emits {first.m}"
        )
    n1 = first.n

    def a(x):
        x1, x2 = x[:n1], x[n1:]
        coupled = np.asarray(second.B(x2), dtype=float) @ np.asarray(first.c(x1), dtype=float)
        return np.concatenate([np.asarray(first.a(x1), dtype=float), np.asarray(second.a(x2), dtype=float) + coupled])

    def B(x):
        x1, x2 = x[:n1], x[n1:]
        return np.vstack([
            np.asarray(first.B(x1), dtype=float),
            np.asarray(second.B(x2), dtype=float) @ np.asarray(first.D(x1), dtype=float),
        ])

    def c(x):
        x1, x2 = x[:n1], x[n1:]
        return np.asarray(second.c(x2), dtype=float) + np.asarray(second.D(x2), dtype=float) @ np.asarray(first.c(x1), dtype=float)

    def D(x):
        x1, x2 = x[:n1], x[n1:]
        return np.asarray(second.D(x2), dtype=float) @ np.asarray(first.D(x1), dtype=float)

    return AffineSystem(
        n=first.n + second.n,
        p=first.p,
        m=second.m,
        a=a,
        B=B,
        c=c,
        D=D,
        name=f"{second.name}*{first.name}",
    )
