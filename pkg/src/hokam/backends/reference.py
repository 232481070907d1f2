"""
Reference backend: single-threaded, fully deterministic.
"""

from __future__ import annotations
from typing import Any, Callable, List
from tqdm.auto import tqdm


def run(
    task: Callable[[int], Any],
    count: int,
    *,
    threads: int = 0,
    show_progress: bool = False,
    desc: str = "",
) -> List[Any]:
    out: List[Any] = []
    for i in tqdm(range(int(count)), desc=desc, disable=not show_progress, leave=False):
        out.append(task(i))
    return out
