"""
Wall-clock timers around experiments and KAM steps, and an opt-in cProfile
wrapper for the CLI entry points (HOKAM_PROFILE=1).
"""

from __future__ import annotations
from typing import Any, Callable
import cProfile
import functools
import logging
import os
import pstats
import time


class Timer:
    """
    with Timer("kam run", logger=log): ...   -> "[timer] kam run: 0.123456s"
    Without a label nothing is logged; `elapsed` is set either way.
    """

    def __init__(self, label: str | None = None, logger: logging.Logger | None = None, level: str = "INFO"):
        self.label = label
        self.logger = logger
        self.level = logging.getLevelName(level)
        self._t0 = 0.0
        self.elapsed = 0.0

    def __enter__(self) -> "Timer":
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.elapsed = time.perf_counter() - self._t0
        if self.logger is not None and self.label:
            self.logger.log(self.level, f"[timer] {self.label}: {self.elapsed:.6f}s")
        return False


def profile_if_env(fn: Callable[..., Any]) -> Callable[..., Any]:
    """Top 30 cumulative-time entries on stdout when HOKAM_PROFILE=1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if os.getenv("HOKAM_PROFILE", "0") != "1":
            return fn(*args, **kwargs)
        prof = cProfile.Profile()
        try:
            return prof.runcall(fn, *args, **kwargs)
        finally:
            pstats.Stats(prof).strip_dirs().sort_stats("cumtime").print_stats(30)

    return wrapper
