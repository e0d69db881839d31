import os

from fastapi import Depends

from app.config import Settings, settings


def get_settings() -> Settings:
    return settings


def get_output_root(current: Settings = Depends(get_settings)) -> str:
    os.makedirs(current.OUTPUT_DIR, exist_ok=True)
    return current.OUTPUT_DIR
