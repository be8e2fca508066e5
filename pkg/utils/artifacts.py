"""
Writes the run artifacts of one CLI invocation: CSV tables stamped with the
config hash, the JSON config snapshot and summary, and the text summary.
"""

import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from utils.logger import log

FLOAT_FORMAT = "%.12g"


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _finite(value: Any) -> Any:
    """
    JSON has no NaN/Infinity; they are written as null.
    """
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


class ArtifactWriter:
    """
    Writes every artifact into one output directory.
    """

    def __init__(self, out_dir: Path, config_hash: str):
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        frame = frame.copy()
        frame.insert(0, "config_hash", self.config_hash)
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        log.debug("Wrote %s (%d rows)", target, len(frame))
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(_finite(payload), indent=2, sort_keys=True, default=_jsonable) + "\n",
                          encoding="utf-8")
        log.debug("Wrote %s", target)
        return target

    def write_text(self, name: str, lines: Iterable[str]) -> Path:
        target = self.path(name)
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        log.debug("Wrote %s", target)
        return target
