from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.errors import EmptyWindow, LengthMismatch, NonFiniteValue, NonUniformGrid


def frozen_array(values, ndim: int, name: str) -> np.ndarray:
    """Copy ``values`` into a read-only float array with ``ndim`` dimensions."""
    array = np.array(values, dtype=float, copy=True)
    if ndim == 2 and array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != ndim:
        raise LengthMismatch(f"{name} must be {ndim}-dimensional", {"shape": array.shape})
    if not np.all(np.isfinite(array)):
        bad = np.argwhere(~np.isfinite(array))[0].tolist()
        raise NonFiniteValue(f"{name} contains non-finite entries", {"index": bad})
    array.setflags(write=False)
    return array


def _check_grid(t0: float, dt: float, count: int):
    if not np.isfinite(t0) or not np.isfinite(dt):
        raise NonFiniteValue("grid origin and step must be finite", {"t0": t0, "dt": dt})
    if dt <= 0:
        raise NonUniformGrid("sample step must be positive", {"dt": dt})
    if count < 1:
        raise EmptyWindow("a window needs at least one sample")


@dataclass(frozen=True)
class SignalWindow:
    """Uniformly sampled (u, y) trajectory segment.

    ``u`` is M x p and ``y`` is M x m; the stacked sample z(k) = (u(k); y(k)).
    """

    t0: float
    dt: float
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = frozen_array(self.u, 2, "u_samples")
        y = frozen_array(self.y, 2, "y_samples")
        if u.shape[0] != y.shape[0]:
            raise LengthMismatch(
                "u and y sample counts differ", {"u": u.shape[0], "y": y.shape[0]}
            )
        _check_grid(float(self.t0), float(self.dt), u.shape[0])
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def M(self) -> int:
        return self.u.shape[0]

    @property
    def p(self) -> int:
        return self.u.shape[1]

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @property
    def t1(self) -> float:
        return self.t0 + (self.M - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.M)

    @property
    def z(self) -> np.ndarray:
        """Joint samples, M x (p + m)."""
        return np.hstack([self.u, self.y])

    @classmethod
    def from_z(cls, t0: float, dt: float, z: np.ndarray, p: int) -> "SignalWindow":
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] < p:
            raise LengthMismatch("joint samples do not match the input dimension", {"p": p})
        return cls(t0=t0, dt=dt, u=z[:, :p], y=z[:, p:])

    def slice(self, start: int, stop: int) -> "SignalWindow":
        if not 0 <= start < stop <= self.M:
            raise EmptyWindow("slice is empty or out of range", {"start": start, "stop": stop})
        return SignalWindow(
            t0=self.t0 + start * self.dt,
            dt=self.dt,
            u=self.u[start:stop],
            y=self.y[start:stop],
        )

    def same_grid(self, other, rtol: float = 1e-9) -> bool:
        return (
            self.M == other.M
            and abs(self.dt - other.dt) <= rtol * self.dt
            and abs(self.t0 - other.t0) <= rtol * max(1.0, abs(self.t0)) + rtol * self.dt
        )


@dataclass(frozen=True)
class LatentWindow:
    """Sampled latent v (SIR input, M x p) or residual r_y (SKR output, M x m)."""

    t0: float
    dt: float
    samples: np.ndarray
    kind: str = "latent"

    def __post_init__(self):
        samples = frozen_array(self.samples, 2, f"{self.kind} samples")
        _check_grid(float(self.t0), float(self.dt), samples.shape[0])
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "samples", samples)

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.M)


@dataclass(frozen=True)
class StackedVector:
    """Window stacked into one vector of M blocks, each block scaled by 1/sqrt(M)."""

    entries: np.ndarray
    blocks: int
    block_dim: int
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        entries = frozen_array(self.entries, 1, "stacked entries")
        if entries.size != self.blocks * self.block_dim:
            raise LengthMismatch(
                "stacked vector size does not match its block layout",
                {"size": entries.size, "blocks": self.blocks, "block_dim": self.block_dim},
            )
        object.__setattr__(self, "entries", entries)

    def dot(self, other: "StackedVector") -> float:
        if self.entries.shape != other.entries.shape:
            raise LengthMismatch(
                "stacked vectors have different sizes",
                {"left": self.entries.size, "right": other.entries.size},
            )
        return float(self.entries @ other.entries)

    @property
    def norm_squared(self) -> float:
        return float(self.entries @ self.entries)
