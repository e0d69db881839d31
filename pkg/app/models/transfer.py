from dataclasses import dataclass

import numpy as np

from app.models.signals import frozen_array


@dataclass(frozen=True)
class TransferEvaluator:
    """State-space data (A, B, C, D) of a transfer matrix.

    ``anti_causal`` marks conjugate systems, which are simulated backward in
    time from a zero terminal state.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    anti_causal: bool = False
    name: str = "G"

    def __post_init__(self):
        for label in ("A", "B", "C", "D"):
            object.__setattr__(self, label, frozen_array(np.atleast_2d(getattr(self, label)), 2, label))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def inputs(self) -> int:
        return self.D.shape[1]

    @property
    def outputs(self) -> int:
        return self.D.shape[0]

    def response(self, omega: float) -> np.ndarray:
        """C (jwI - A)^-1 B + D."""
        if self.n == 0:
            return self.D.astype(complex)
        resolvent = np.linalg.solve(1j * omega * np.eye(self.n) - self.A, self.B)
        return self.C @ resolvent + self.D

    def conjugate(self) -> "TransferEvaluator":
        """G~(s) = G(-s)^T realized as (-A^T, -C^T, B^T, D^T)."""
        return TransferEvaluator(
            A=-self.A.T,
            B=-self.C.T,
            C=self.B.T,
            D=self.D.T,
            anti_causal=not self.anti_causal,
            name=f"{self.name}~",
        )
