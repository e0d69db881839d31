import os
import tempfile
from typing import Optional

import pandas as pd

from app.config import settings
from app.errors import ConfigInvalid


def ensure_output_dir(path: Optional[str] = None, create: bool = True) -> str:
    """Return the run output directory, creating it when allowed."""
    path = path or settings.OUTPUT_DIR
    if not os.path.isdir(path):
        if not create:
            raise ConfigInvalid("output directory does not exist", {"path": path})
        os.makedirs(path, exist_ok=True)
    return path


def write_text_atomic(file_path: str, text: str):
    """Write text through a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(file_path))
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as buffer:
            buffer.write(text)
        os.replace(tmp_path, file_path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_frame_csv(file_path: str, frame: pd.DataFrame):
    """Write a data frame as CSV with round-trip float formatting, atomically"""
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    write_text_atomic(file_path, text)

