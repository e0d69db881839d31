from fastapi import APIRouter, Depends, HTTPException
from typing import Optional
import logging
import os

from app.dependencies import get_output_root
from app.errors import ConfigInvalid, ProjectionError
from app.harness.runner import run_detect_sir, run_detect_skr, run_estimate, run_simulate
from app.schemas.report import RunReport
from app.schemas.scenario import Scenario

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/runs", tags=["runs"])


def _execute(command: str, runner, scenario: Scenario, root: str, seed: Optional[int], burn_in: Optional[float]):
    logger.info("=" * 60)
    logger.info(f"{command.upper()} ENDPOINT - Request Received")
    logger.info("=" * 60)
    logger.info(f"Scenario: {scenario.name} (plant {scenario.plant.name}, fault {scenario.fault.kind.value})")
    logger.info("=" * 60)

    out_dir = os.path.join(root, scenario.name)
    os.makedirs(out_dir, exist_ok=True)
    try:
        return runner(scenario, out_dir=out_dir, seed=seed, burn_in=burn_in)
    except ConfigInvalid as e:
        raise HTTPException(status_code=422, detail=str(e))
    except ProjectionError as e:
        raise HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}")


# ==================== SIMULATE ====================
@router.post("/simulate", response_model=RunReport)
def simulate_scenario(
    scenario: Scenario,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
    root: str = Depends(get_output_root),
):
    """Generate the recorded (u, y) of a scenario and write data.csv"""
    return _execute("simulate", run_simulate, scenario, root, seed, burn_in)


# ==================== DETECT SIR ====================
@router.post("/detect-sir", response_model=RunReport)
def detect_with_sir(
    scenario: Scenario,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
    root: str = Depends(get_output_root),
):
    """
    Image-manifold projection and divergence test per window

    Schema (all fields optional):
    {
        "plant": {"name": "scalar_lti"},
        "fault": {"kind": "sensor_bias", "t_on": 5.0, "vector": [0.5]},
        "M": 200,
        "gamma": 0.95
    }
    """
    return _execute("detect-sir", run_detect_sir, scenario, root, seed, burn_in)


# ==================== DETECT SKR ====================
@router.post("/detect-skr", response_model=RunReport)
def detect_with_skr(
    scenario: Scenario,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
    root: str = Depends(get_output_root),
):
    """Residual generator plus adjoint estimate, tested against the alpha threshold"""
    return _execute("detect-skr", run_detect_skr, scenario, root, seed, burn_in)


# ==================== ESTIMATE ====================
@router.post("/estimate", response_model=RunReport)
def estimate_uncertainty(
    scenario: Scenario,
    seed: Optional[int] = None,
    burn_in: Optional[float] = None,
    root: str = Depends(get_output_root),
):
    return _execute("estimate", run_estimate, scenario, root, seed, burn_in)
