from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.models.signals import frozen_array
from app.models.systems import AffineSystem, LtiSystem


@dataclass(frozen=True)
class StorageFunction:
    """Scalar storage P(x) (or V(x_hat)) together with its gradient."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = "storage"

    def __call__(self, x: np.ndarray) -> float:
        return float(self.value(x))


def _constant_jacobians(lti: LtiSystem) -> dict:
    A, C = lti.A, lti.C
    zero_b = np.zeros((lti.n, lti.n))
    zero_d = np.zeros((lti.m, lti.n))
    return {
        "jac_a": lambda x: A,
        "jac_c": lambda x: C,
        "dB": lambda x, u: zero_b,
        "dD": lambda x, u: zero_d,
    }


@dataclass(frozen=True)
class SirRealization:
    """Stable image representation built around ``base`` with pre-filter (g, V).

    Maps a latent v to z = (u; y):
    a_I = a + Bg, B_I = BV, c_I = (g; c + Dg), D_I = (V; DV).
    ``linearization`` holds constant (A_I, B_I, C_I, D_I) when the realization
    is exactly linear.
    """

    base: AffineSystem
    g: Callable[[np.ndarray], np.ndarray]
    V: Callable[[np.ndarray], np.ndarray]
    normalized: bool = False
    storage: Optional[StorageFunction] = None
    linearization: Optional[LtiSystem] = None

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def m(self) -> int:
        return self.base.m

    def a_I(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.base.a(x), dtype=float) + np.asarray(self.base.B(x), dtype=float) @ self.g(x)

    def B_I(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.base.B(x), dtype=float) @ np.asarray(self.V(x), dtype=float)

    def c_I(self, x: np.ndarray) -> np.ndarray:
        g = np.asarray(self.g(x), dtype=float)
        y = np.asarray(self.base.c(x), dtype=float) + np.asarray(self.base.D(x), dtype=float) @ g
        return np.concatenate([g, y])

    def D_I(self, x: np.ndarray) -> np.ndarray:
        V = np.asarray(self.V(x), dtype=float)
        return np.vstack([V, np.asarray(self.base.D(x), dtype=float) @ V])

    def as_system(self) -> AffineSystem:
        extra = _constant_jacobians(self.linearization) if self.linearization is not None else {}
        return AffineSystem(
            n=self.n,
            p=self.p,
            m=self.p + self.m,
            a=self.a_I,
            B=self.B_I,
            c=self.c_I,
            D=self.D_I,
            name=f"sir[{self.base.name}]",
            **extra,
        )


@dataclass(frozen=True)
class SkrRealization:
    """Stable kernel representation (observer-based residual generator).

    Maps z = (u; y) to r_y:
    a_K = a - Lc, B_K = (B - LD, L), c_K = -Wc, D_K = (-WD, W).
    """

    base: AffineSystem
    L: Callable[[np.ndarray], np.ndarray]
    W: Callable[[np.ndarray], np.ndarray]
    normalized: bool = False
    storage: Optional[StorageFunction] = None
    linearization: Optional[LtiSystem] = None

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def m(self) -> int:
        return self.base.m

    def a_K(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.base.a(x), dtype=float) - np.asarray(self.L(x), dtype=float) @ np.asarray(self.base.c(x), dtype=float)

    def B_K(self, x: np.ndarray) -> np.ndarray:
        L = np.asarray(self.L(x), dtype=float)
        B = np.asarray(self.base.B(x), dtype=float)
        D = np.asarray(self.base.D(x), dtype=float)
        return np.hstack([B - L @ D, L])

    def c_K(self, x: np.ndarray) -> np.ndarray:
        return -np.asarray(self.W(x), dtype=float) @ np.asarray(self.base.c(x), dtype=float)

    def D_K(self, x: np.ndarray) -> np.ndarray:
        W = np.asarray(self.W(x), dtype=float)
        return np.hstack([-W @ np.asarray(self.base.D(x), dtype=float), W])

    def as_system(self) -> AffineSystem:
        extra = _constant_jacobians(self.linearization) if self.linearization is not None else {}
        return AffineSystem(
            n=self.n,
            p=self.p + self.m,
            m=self.m,
            a=self.a_K,
            B=self.B_K,
            c=self.c_K,
            D=self.D_K,
            name=f"skr[{self.base.name}]",
            **extra,
        )


@dataclass(frozen=True)
class ControlFactors:
    """Normalized right coprime factor data (X, F, V0)."""

    X: np.ndarray
    F: np.ndarray
    V0: np.ndarray
    residual: float
    iterations: int

    def __post_init__(self):
        object.__setattr__(self, "X", frozen_array(self.X, 2, "X"))
        object.__setattr__(self, "F", frozen_array(self.F, 2, "F"))
        object.__setattr__(self, "V0", frozen_array(self.V0, 2, "V0"))


@dataclass(frozen=True)
class FilterFactors:
    """Normalized left coprime factor data (Y, L0, W0)."""

    Y: np.ndarray
    L0: np.ndarray
    W0: np.ndarray
    residual: float
    iterations: int

    def __post_init__(self):
        object.__setattr__(self, "Y", frozen_array(self.Y, 2, "Y"))
        object.__setattr__(self, "L0", frozen_array(self.L0, 2, "L0"))
        object.__setattr__(self, "W0", frozen_array(self.W0, 2, "W0"))


@dataclass(frozen=True)
class LtiFactorization:
    riccati_X: np.ndarray
    riccati_Y: np.ndarray
    F: np.ndarray
    V0: np.ndarray
    L0: np.ndarray
    W0: np.ndarray
    residual_X: float = 0.0
    residual_Y: float = 0.0

    @classmethod
    def from_parts(cls, control: ControlFactors, filter_: FilterFactors) -> "LtiFactorization":
        return cls(
            riccati_X=control.X,
            riccati_Y=filter_.Y,
            F=control.F,
            V0=control.V0,
            L0=filter_.L0,
            W0=filter_.W0,
            residual_X=control.residual,
            residual_Y=filter_.residual,
        )
