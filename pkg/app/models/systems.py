from dataclasses import dataclass
from typing import Callable, Optional
import enum

import numpy as np

from app.errors import DimensionMismatch, NonFiniteValue, NonUniformGrid
from app.models.signals import frozen_array

Evaluator = Callable[[np.ndarray], np.ndarray]
DirectionalEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


class InputHold(str, enum.Enum):
    ZOH = "zoh"
    LINEAR = "linear"
    CUBIC = "cubic"


@dataclass(frozen=True)
class AffineSystem:
    """Input-affine plant: dx/dt = a(x) + B(x)u, y = c(x) + D(x)u.

    ``jac_a``/``jac_c`` return the state Jacobians of a and c; ``dB``/``dD``
    return the state Jacobians of B(x)u and D(x)u for a given u. When all four
    are present the Jacobians are analytic, otherwise central differences are
    used.
    """

    n: int
    p: int
    m: int
    a: Evaluator
    B: Evaluator
    c: Evaluator
    D: Evaluator
    jac_a: Optional[Evaluator] = None
    jac_c: Optional[Evaluator] = None
    dB: Optional[DirectionalEvaluator] = None
    dD: Optional[DirectionalEvaluator] = None
    name: str = "plant"

    @property
    def has_analytic_jacobians(self) -> bool:
        return None not in (self.jac_a, self.jac_c, self.dB, self.dD)

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.a(x), dtype=float) + np.asarray(self.B(x), dtype=float) @ u

    def h(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.c(x), dtype=float) + np.asarray(self.D(x), dtype=float) @ u

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """State Jacobians of f(x, u) and h(x, u) with u held fixed."""
        if self.has_analytic_jacobians:
            fx = np.asarray(self.jac_a(x), dtype=float) + np.asarray(self.dB(x, u), dtype=float)
            hx = np.asarray(self.jac_c(x), dtype=float) + np.asarray(self.dD(x, u), dtype=float)
            return fx, hx
        # local import keeps models free of the core package at import time
        from app.core.systems import fd_jacobian

        return fd_jacobian(lambda xi: self.f(xi, u), x), fd_jacobian(lambda xi: self.h(xi, u), x)

    def check_shapes(self, x: Optional[np.ndarray] = None):
        """Evaluate every map once and confirm the declared dimensions."""
        x = np.zeros(self.n) if x is None else np.asarray(x, dtype=float)
        expected = {
            "a": (self.a(x), (self.n,)),
            "B": (self.B(x), (self.n, self.p)),
            "c": (self.c(x), (self.m,)),
            "D": (self.D(x), (self.m, self.p)),
        }
        for label, (value, shape) in expected.items():
            value = np.asarray(value, dtype=float)
            if value.shape != shape:
                raise DimensionMismatch(
                    f"{self.name}: {label}(x) has shape {value.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(value)):
                raise NonFiniteValue(f"{self.name}: {label}(x) is not finite", {"x": x.tolist()})


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = frozen_array(np.atleast_2d(self.A), 2, "A")
        B = frozen_array(np.atleast_2d(self.B), 2, "B")
        C = frozen_array(np.atleast_2d(self.C), 2, "C")
        D = frozen_array(np.atleast_2d(self.D), 2, "D")
        n, p, m = A.shape[0], B.shape[1], C.shape[0]
        if A.shape != (n, n) or B.shape != (n, p) or C.shape != (m, n) or D.shape != (m, p):
            raise DimensionMismatch(
                "inconsistent state-space matrices",
                {"A": A.shape, "B": B.shape, "C": C.shape, "D": D.shape},
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class Grid:
    t0: float
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise NonUniformGrid("grid step must be positive", {"dt": self.dt})
        if self.steps < 1:
            raise NonUniformGrid("grid needs at least one sample", {"steps": self.steps})

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps)

    @property
    def t1(self) -> float:
        return self.t0 + (self.steps - 1) * self.dt
