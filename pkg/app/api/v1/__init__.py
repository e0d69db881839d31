from fastapi import APIRouter
from app.api.v1 import runs, verify

api_router = APIRouter()

api_router.include_router(runs.router)
api_router.include_router(verify.router)
