import numpy as np

from app.core.systems import simulate
from app.models.signals import LatentWindow, SignalWindow


def sinusoid_input(M: int, dt: float, amplitude: float = 1.0, omega: float = 0.5, p: int = 1) -> np.ndarray:
    times = dt * np.arange(M)
    return amplitude * np.sin(omega * times)[:, None] * np.ones((1, p))


def gaussian_taper(M: int, dt: float, center: float = 20.0, width: float = 4.0) -> np.ndarray:
    times = dt * np.arange(M)
    return np.exp(-0.5 * ((times - center) / width) ** 2)


def plant_data(bundle, u: np.ndarray, dt: float, x0=None) -> SignalWindow:
    _, data = simulate(bundle.system, LatentWindow(t0=0.0, dt=dt, samples=u, kind="input"), x0)
    return data


def add_to_outputs(data: SignalWindow, offset) -> SignalWindow:
    offset = np.asarray(offset, dtype=float).reshape(data.M, -1)
    return SignalWindow(t0=data.t0, dt=data.dt, u=data.u, y=data.y + offset)
