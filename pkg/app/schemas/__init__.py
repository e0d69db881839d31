from app.schemas.report import (
    Scheme, CheckRecord, DetectionReport, MinimalityReport, LsOptimalityReport, RunReport, VerifyReport,
)
from app.schemas.scenario import (
    InputKind, FaultKind, PlantSpec, Sinusoid, InputSpec, GridSpec, FaultSpec, NoiseSpec, Scenario,
)

__all__ = [
    "Scheme", "CheckRecord", "DetectionReport", "MinimalityReport", "LsOptimalityReport",
    "RunReport", "VerifyReport",
    "InputKind", "FaultKind", "PlantSpec", "Sinusoid", "InputSpec", "GridSpec", "FaultSpec",
    "NoiseSpec", "Scenario",
]
