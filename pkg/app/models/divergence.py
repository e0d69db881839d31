from dataclasses import dataclass
from typing import Callable, Optional
import enum

import numpy as np


class Verdict(str, enum.Enum):
    FAULT_FREE = "fault_free"
    FAULTY = "faulty"


@dataclass(frozen=True)
class GeneratingFunction:
    """Convex generator phi of a Bregman divergence.

    ``conjugate`` is the Legendre dual phi^x evaluated at a dual point
    (the gradient of phi at a primal point), when it has a closed form.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = "generator"
    convex: bool = False
    conjugate: Optional[Callable[[np.ndarray], float]] = None
