from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict
import enum

from app.config import settings
from app.models.results import SkrCostate
from app.models.systems import InputHold


class InputKind(str, enum.Enum):
    SINUSOIDS = "sinusoids"
    STEP = "step"
    FILE = "file"


class FaultKind(str, enum.Enum):
    NONE = "none"
    ACTUATOR_BIAS = "actuator_bias"
    SENSOR_BIAS = "sensor_bias"
    ACTUATOR_GAIN = "actuator_gain"


class PlantSpec(BaseModel):
    name: str = "scalar_lti"
    matrices: Optional[Dict[str, List[List[float]]]] = None  # A, B, C, D for lti_custom


class Sinusoid(BaseModel):
    amplitude: float = 1.0
    frequency: float = 0.5  # rad/s
    phase: float = 0.0
    channel: int = Field(default=0, ge=0)


class InputSpec(BaseModel):
    kind: InputKind = InputKind.SINUSOIDS
    sinusoids: List[Sinusoid] = [Sinusoid()]
    random_phase: bool = False
    step_time: float = 0.0
    level: List[float] = [1.0]
    path: Optional[str] = None
    recorded: bool = False  # use the file's y columns as data instead of simulating


class GridSpec(BaseModel):
    t0: float = 0.0
    dt: float = Field(default=0.01, gt=0)
    steps: int = Field(default=2001, ge=2)

    @property
    def t1(self) -> float:
        return self.t0 + (self.steps - 1) * self.dt


class FaultSpec(BaseModel):
    kind: FaultKind = FaultKind.NONE
    t_on: float = 0.0
    vector: Optional[List[float]] = None
    factor: Optional[float] = None


class NoiseSpec(BaseModel):
    amplitude: List[float] = []  # per channel of (u; y), a single value applies to all


class Scenario(BaseModel):
    name: str = "scenario"
    plant: PlantSpec = PlantSpec()
    input: InputSpec = InputSpec()
    x0: Optional[List[float]] = None
    grid: GridSpec = GridSpec()
    fault: FaultSpec = FaultSpec()
    noise: NoiseSpec = NoiseSpec()
    M: Optional[int] = Field(default=None, ge=1)
    gamma: float = settings.DEFAULT_GAMMA
    alpha: float = settings.DEFAULT_ALPHA
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    burn_in: float = Field(default=settings.DEFAULT_BURN_IN, ge=0.0, lt=1.0)
    skr_costate: SkrCostate = SkrCostate.ADJOINT
    hold: Optional[InputHold] = None

    @model_validator(mode="after")
    def check_consistency(self):
        grid = self.grid
        if self.fault.kind is not FaultKind.NONE:
            if not grid.t0 <= self.fault.t_on <= grid.t1:
                raise ValueError(f"fault t_on {self.fault.t_on} lies outside the grid [{grid.t0}, {grid.t1}]")
            if self.fault.kind is FaultKind.ACTUATOR_GAIN and self.fault.factor is None:
                raise ValueError("actuator_gain needs a factor")
            if self.fault.kind in (FaultKind.ACTUATOR_BIAS, FaultKind.SENSOR_BIAS) and not self.fault.vector:
                raise ValueError(f"{self.fault.kind.value} needs a bias vector")
        if self.input.kind is not InputKind.FILE and self.M is not None and self.M > grid.steps:
            raise ValueError(f"window M={self.M} exceeds the {grid.steps} grid steps")
        if self.input.kind is InputKind.FILE and not self.input.path:
            raise ValueError("file input needs a path")
        return self
