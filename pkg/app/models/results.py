from dataclasses import dataclass, replace
import enum

import numpy as np

from app.models.signals import LatentWindow, SignalWindow, frozen_array


class SirCostate(str, enum.Enum):
    ALGEBRAIC = "algebraic"
    ADJOINT = "adjoint"


class SkrCostate(str, enum.Enum):
    ADJOINT = "adjoint"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class SirProjectionResult:
    """Output of the SIR projection system on one window.

    Arrays are aligned with the data grid: ``zhat`` is M x (p + m),
    ``latent_v`` is M x p, ``state_x`` is M x n, ``H``/``Hdual`` have length M.
    """

    t0: float
    dt: float
    p: int
    zhat: np.ndarray
    latent_v: np.ndarray
    state_x: np.ndarray
    H: np.ndarray
    Hdual: np.ndarray
    costate: SirCostate = SirCostate.ALGEBRAIC
    sweeps: int = 0

    def __post_init__(self):
        for name, ndim in (("zhat", 2), ("latent_v", 2), ("state_x", 2), ("H", 1), ("Hdual", 1)):
            object.__setattr__(self, name, frozen_array(getattr(self, name), ndim, name))

    @property
    def M(self) -> int:
        return self.zhat.shape[0]

    def zhat_window(self) -> SignalWindow:
        return SignalWindow.from_z(self.t0, self.dt, self.zhat, self.p)

    def latent_window(self) -> LatentWindow:
        return LatentWindow(t0=self.t0, dt=self.dt, samples=self.latent_v, kind="latent")

    def slice(self, start: int, stop: int) -> "SirProjectionResult":
        return replace(
            self,
            t0=self.t0 + start * self.dt,
            zhat=self.zhat[start:stop],
            latent_v=self.latent_v[start:stop],
            state_x=self.state_x[start:stop],
            H=self.H[start:stop],
            Hdual=self.Hdual[start:stop],
        )


@dataclass(frozen=True)
class SkrProjectionResult:
    """Forward residual pass and adjoint estimate of the SKR projection system."""

    t0: float
    dt: float
    p: int
    zdelta: np.ndarray
    residual_r: np.ndarray
    costate: np.ndarray
    state_xhat: np.ndarray
    mode: SkrCostate = SkrCostate.ADJOINT

    def __post_init__(self):
        for name in ("zdelta", "residual_r", "costate", "state_xhat"):
            object.__setattr__(self, name, frozen_array(getattr(self, name), 2, name))

    @property
    def M(self) -> int:
        return self.zdelta.shape[0]

    def zdelta_window(self) -> SignalWindow:
        return SignalWindow.from_z(self.t0, self.dt, self.zdelta, self.p)

    def residual_window(self) -> LatentWindow:
        return LatentWindow(t0=self.t0, dt=self.dt, samples=self.residual_r, kind="residual")


@dataclass(frozen=True)
class UncertaintyEstimate:
    """Estimated (du; dy) together with the replay consistency of the residual."""

    t0: float
    dt: float
    p: int
    zdelta: np.ndarray
    consistency_defect: float
    residual_r: np.ndarray
    replay_r: np.ndarray

    def __post_init__(self):
        for name in ("zdelta", "residual_r", "replay_r"):
            object.__setattr__(self, name, frozen_array(getattr(self, name), 2, name))

    @property
    def M(self) -> int:
        return self.zdelta.shape[0]

    @property
    def du(self) -> np.ndarray:
        return self.zdelta[:, : self.p]

    @property
    def dy(self) -> np.ndarray:
        return self.zdelta[:, self.p :]

    def zdelta_window(self) -> SignalWindow:
        return SignalWindow.from_z(self.t0, self.dt, self.zdelta, self.p)
