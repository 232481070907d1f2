"""
Execution backends for hokam.

Each backend exposes:
    run(task, count, *, threads=0, show_progress=False, desc="") -> list

`task(i)` is evaluated for i in range(count) and results come back in index
order, whatever the completion order. Use `get_backend(name)` to resolve by string.
"""

from __future__ import annotations
from typing import Callable, Dict

from . import reference as _reference
from . import scale as _scale

_BACKENDS: Dict[str, Callable] = {
    "reference": _reference.run,
    "scale": _scale.run,
}


def get_backend(name: str) -> Callable:
    try:
        return _BACKENDS[name]
    except KeyError as e:
        raise KeyError(f"unknown backend: {name!r}. Available: {sorted(_BACKENDS)}") from e


def list_backends() -> list[str]:
    return sorted(_BACKENDS)
