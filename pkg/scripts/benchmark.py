#!/usr/bin/env python
"""
Micro-benchmarks for hokam backends on the Monte-Carlo divisor scan.

Examples:
  python scripts/benchmark.py --backends reference scale --samples 500 2000 --K 10 30
"""
from __future__ import annotations
import argparse, time
from typing import List

import numpy as np
import pandas as pd

from hokam import params
from hokam.divisors import sample_margins
from hokam.kernels import HAS_NUMBA
from hokam.registry import get_frequency_model
from hokam.utils.logging import get_logger
from hokam.utils.profiling import Timer


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", "-c", default="configs/measure.yaml")
    ap.add_argument("--backends", nargs="+", default=["reference", "scale"])
    ap.add_argument("--samples", nargs="+", type=int, default=[500])
    ap.add_argument("--K", nargs="+", type=int, default=[10, 30])
    ap.add_argument("--threads", type=int, default=0, help="scale backend workers")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)

    log = get_logger("hokam.bench", level="DEBUG" if args.verbose else "INFO")
    log.info(f"numba kernels: {'on' if HAS_NUMBA else 'off (numpy fallback)'}")

    ms = params.load_config(args.config)["measure"]
    model = get_frequency_model(ms["omega_model"])
    results: List[dict] = []

    for S in args.samples:
        for K in args.K:
            ref = None
            for backend in args.backends:
                with Timer(f"{backend} samples={S} K={K}", logger=log):
                    t0 = time.perf_counter()
                    m = sample_margins(
                        ms["box"], model, tau=ms["tau"], K=K, J=ms["J"], samples=S, seed=0,
                        backend=backend, threads=args.threads,
                    )
                    dt = time.perf_counter() - t0
                ref = m if ref is None else ref
                results.append({
                    "backend": backend,
                    "samples": S,
                    "K": K,
                    "sec": round(dt, 4),
                    "samples_per_sec": round(S / max(dt, 1e-9), 1),
                    "matches_first": bool(np.array_equal(m, ref)),
                })

    table = pd.DataFrame(results).sort_values(["samples", "K", "backend"])
    print("\n=== Benchmark results ===")
    try:
        print(table.to_markdown(index=False))
    except Exception:
        print(table)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
