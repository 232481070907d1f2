"""
Thread-pool backend. numpy/scipy release the GIL in the heavy kernels, so
threads are enough for the per-sample and per-grid-point work done here.
"""

from __future__ import annotations
from typing import Any, Callable, List
import concurrent.futures as _cf
from tqdm.auto import tqdm

from .reference import run as _run_reference


def run(
    task: Callable[[int], Any],
    count: int,
    *,
    threads: int = 0,
    show_progress: bool = False,
    desc: str = "",
) -> List[Any]:
    count = int(count)
    workers = int(threads or 0)
    if workers <= 1:
        return _run_reference(task, count, show_progress=show_progress, desc=desc)

    results: List[Any] = [None] * count
    with _cf.ThreadPoolExecutor(max_workers=workers) as ex:
        futs = {ex.submit(task, i): i for i in range(count)}
        bar = tqdm(total=count, desc=desc, disable=not show_progress, leave=False)
        for f in _cf.as_completed(futs):
            results[futs[f]] = f.result()
            bar.update(1)
        bar.close()
    return results
