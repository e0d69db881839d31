from fastapi import APIRouter, HTTPException
import logging

from app.harness.verify import SUITE_NAMES, run_verify
from app.schemas.report import VerifyReport

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/verify", tags=["verify"])


@router.get("/", response_model=list[str])
def list_suites():
    return SUITE_NAMES


@router.get("/{suite}", response_model=VerifyReport)
def verify_suite(suite: str):
    """Run an invariant suite; failed checks are reported, not raised"""
    if suite not in SUITE_NAMES:
        logger.error(f"Unknown verify suite: {suite}")
        raise HTTPException(status_code=404, detail=f"Unknown suite '{suite}'")
    return run_verify(suite)
