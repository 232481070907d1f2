"""
Logging for hokam: stdlib loggers named per module ("hokam.engine", ...), one
stderr handler each, and compact JSON event lines for KAM steps and provenance.
"""

from __future__ import annotations
from typing import Any, Mapping
import json
import logging as _L
import sys

import numpy as np

_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"


def _level(level: int | str) -> int:
    return int(_L.getLevelName(level.upper())) if isinstance(level, str) else int(level)


def get_logger(name: str = "hokam", level: int | str = "INFO") -> _L.Logger:
    """Logger with a single stderr handler; calling again only updates the level."""
    logger = _L.getLogger(name)
    if not logger.handlers:
        h = _L.StreamHandler(stream=sys.stderr)
        h.setFormatter(_L.Formatter(_FORMAT, datefmt=_DATEFMT))
        logger.addHandler(h)
        logger.propagate = False
    set_verbosity(level, logger)
    return logger


def set_verbosity(level: int | str, logger: _L.Logger | None = None) -> None:
    (logger or _L.getLogger("hokam")).setLevel(_level(level))


def _jsonable(v: Any) -> Any:
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def log_json(
    logger: _L.Logger, payload: Mapping[str, Any], level: int | str = "INFO", prefix: str | None = None
) -> None:
    """
    One JSON object per line, e.g. {"event":"kam_step","nu":2,"eps":3.1e-09}.
    numpy scalars/arrays and complex numbers are converted.
    """
    msg = json.dumps(payload, separators=(",", ":"), ensure_ascii=False, default=_jsonable)
    logger.log(_level(level), f"{prefix} {msg}" if prefix else msg)


def log_provenance(logger: _L.Logger, *, extra: Mapping[str, Any] | None = None) -> None:
    from ..io import provenance

    log_json(logger, {"event": "provenance", **provenance(dict(extra) if extra else None)})
