from pydantic import BaseModel
from typing import Optional, List, Dict
import enum

from app.models.divergence import Verdict


class Scheme(str, enum.Enum):
    SIR = "sir"
    SKR = "skr"


class CheckRecord(BaseModel):
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    worst_point: Optional[List[float]] = None
    detail: Optional[str] = None


class DetectionReport(BaseModel):
    scheme: Scheme
    window_index: int = 0
    t0: float
    t1: float
    M: int
    J: float
    J_th: float
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    verdict: Verdict
    energy: float
    energy_ratio: Optional[float] = None  # H_M / (1/2 z_M^T z_M), SIR only
    clamped_samples: int = 0
    divergence_series: List[float] = []


class MinimalityReport(BaseModel):
    n_candidates: int
    violations: int
    reference_divergence: float
    min_margin: float
    margins: List[float]
    passed: bool


class LsOptimalityReport(BaseModel):
    scalings: List[float]
    reference_cost: float
    costs: Dict[str, float]
    residual_costs: Dict[str, float]
    skipped: List[float] = []
    min_margin: Optional[float] = None
    passed: bool


class RunReport(BaseModel):
    command: str
    scenario: Dict
    windows: List[DetectionReport] = []
    files: Dict[str, str] = {}
    verdict: Verdict = Verdict.FAULT_FREE
    exit_status: int = 0
    consistency_defect: Optional[float] = None
    zdelta_energy_ratio: Optional[float] = None


class VerifyReport(BaseModel):
    suite: str
    checks: List[CheckRecord]
    passed: bool
