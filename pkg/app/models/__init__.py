from app.models.signals import SignalWindow, LatentWindow, StackedVector
from app.models.systems import AffineSystem, LtiSystem, Grid, InputHold
from app.models.realizations import (
    StorageFunction, SirRealization, SkrRealization,
    ControlFactors, FilterFactors, LtiFactorization,
)
from app.models.results import (
    SirCostate, SkrCostate, SirProjectionResult, SkrProjectionResult, UncertaintyEstimate,
)
from app.models.divergence import GeneratingFunction, Verdict
from app.models.transfer import TransferEvaluator

__all__ = [
    "SignalWindow", "LatentWindow", "StackedVector",
    "AffineSystem", "LtiSystem", "Grid", "InputHold",
    "StorageFunction", "SirRealization", "SkrRealization",
    "ControlFactors", "FilterFactors", "LtiFactorization",
    "SirCostate", "SkrCostate", "SirProjectionResult", "SkrProjectionResult", "UncertaintyEstimate",
    "GeneratingFunction", "Verdict",
    "TransferEvaluator",
]
