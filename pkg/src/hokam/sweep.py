#!/usr/bin/env python
from __future__ import annotations

import argparse
import itertools
import json
import os
import time
from copy import deepcopy
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd
import yaml

from . import params, rng as _rng
from .errors import ConfigError, HokamError
from .io import emit_plot_data, write_manifest, write_table
from .run import _raw_config, _set_nested, run_experiment, write_outputs
from .utils.logging import get_logger, log_provenance
from .utils.profiling import Timer

# ---- helpers ----


def _expand_values(values: Any) -> List[Any]:
    if values is None:
        return [None]
    if isinstance(values, (list, tuple)):
        return list(values)
    if isinstance(values, dict) and {"start", "stop", "num"} <= set(values):
        space = np.logspace if values.get("log") else np.linspace
        vals = space(float(values["start"]), float(values["stop"]), int(values["num"]))
        return [float(v) for v in vals]
    return [values]


def _load_sweep_config(path: str) -> Tuple[Dict[str, Any], Dict[str, List[Any]]]:
    raw = _raw_config(path)
    base = _raw_config(raw["base"]) if raw.get("base") else {}
    for k, v in raw.items():
        if k not in {"base", "sweep"}:
            if isinstance(v, dict):
                for kk, vv in v.items():
                    _set_nested(base, f"{k}.{kk}", vv)
            else:
                _set_nested(base, k, v)
    grid_raw = (raw.get("sweep") or {}).get("grid") or {}
    grid: Dict[str, List[Any]] = {k: _expand_values(v) for k, v in grid_raw.items()}
    return base, grid


def _product_dict(grid: Dict[str, List[Any]]) -> Iterable[Dict[str, Any]]:
    keys = list(grid)
    for values in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, values, strict=True))


def _scalars(summary: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten the scalar entries of an experiment summary into one row."""
    row: Dict[str, Any] = {}
    for k, v in summary.items():
        if isinstance(v, dict):
            row.update(_scalars(v, f"{prefix}{k}."))
        elif isinstance(v, (bool, int, float, str, np.generic)):
            row[f"{prefix}{k}"] = v.item() if isinstance(v, np.generic) else v
    return row


def point_seed(seed_root: int, idx: int) -> int:
    return int(_rng.substream(seed_root, _rng.Stream.POINT, idx).generate_state(1)[0])


# ---- main ----


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="hokam-sweep",
        description="Run one experiment over a grid of config values and write a combined table.",
    )
    ap.add_argument(
        "-c", "--config", required=True, help="Sweep YAML (with 'sweep.grid') or base config YAML"
    )
    ap.add_argument("-o", "--out", help="Output directory (default: $HOKAM_OUT/sweep_<experiment>)")
    ap.add_argument("--out-format", choices=["parquet", "csv"], help="Override output format")
    # VALUES is a comma list (0.01,0.02) or a linspace JSON: {"start":0,"stop":1,"num":11}
    ap.add_argument(
        "--grid",
        action="append",
        metavar="KEY=VALUES",
        help='Inline grid, e.g. --grid "reduce.epsilon=0.01,0.05,0.1"',
    )
    ap.add_argument(
        "--experiments-workers", type=int, default=0, help="Parallel grid points (0/1 sequential)"
    )
    ap.add_argument("--seed", type=int, help="Seed root (deterministic)")
    ap.add_argument(
        "--vary-seed", action="store_true", help="Derive a distinct seed per grid point"
    )
    ap.add_argument("--keep-outputs", action="store_true", help="Write every point's tables")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)

    log = get_logger("hokam.sweep", level="DEBUG" if args.verbose else "INFO")

    try:
        if args.grid:
            base = _raw_config(args.config)
            grid: Dict[str, List[Any]] = {}
            for item in args.grid:
                if "=" not in item:
                    raise ConfigError(f"--grid must be KEY=VALUES, got: {item}")
                key, values = item.split("=", 1)
                values = values.strip()
                if values.startswith("{"):
                    vals = _expand_values(json.loads(values))
                else:
                    vals = [yaml.safe_load(x) for x in values.split(",")]
                grid[key.strip()] = vals
        else:
            base, grid = _load_sweep_config(args.config)

        if args.out_format:
            _set_nested(base, "output.format", args.out_format)
        if args.seed is not None:
            _set_nested(base, "meta.seed_root", int(args.seed))
        base_cfg = params.load_config(base)
    except (HokamError, ValueError, KeyError) as e:
        log.error(f"[error] {type(e).__name__}: {e}")
        return getattr(e, "exit_code", 1)

    name = base_cfg["meta"]["experiment"]
    out_dir = args.out or os.path.join(params.output_root(base_cfg), f"sweep_{name}")
    combos = list(_product_dict(grid)) if grid else [dict()]
    log.info(f"[sweep] {name}: {len(combos)} point(s)")

    def _run_one(idx_val: Tuple[int, Dict[str, Any]]) -> Dict[str, Any]:
        idx, vals = idx_val
        raw = deepcopy(base_cfg)
        for k, v in vals.items():
            _set_nested(raw, k, v)
        if args.vary_seed:
            raw["meta"]["seed_root"] = point_seed(base_cfg["meta"]["seed_root"], idx)
        row: Dict[str, Any] = {"point": idx, **vals, "exit_code": 0, "error": ""}
        try:
            cfg = params.load_config(raw)
            row["seed_root"] = cfg["meta"]["seed_root"]
            t0 = time.perf_counter()
            result = run_experiment(cfg)
            if args.keep_outputs:
                write_outputs(result, cfg, os.path.join(out_dir, f"point_{idx:04d}"), time.perf_counter() - t0)
            row.update(_scalars(result.get("summary", {})))
        except HokamError as e:
            row.update(exit_code=e.exit_code, error=f"{type(e).__name__}: {e}")
        except (KeyError, ValueError) as e:
            row.update(exit_code=1, error=f"{type(e).__name__}: {e}")
        if row["exit_code"]:
            log.warning(f"[sweep] point {idx} {vals} failed: {row['error']}")
        return row

    with Timer("sweep", logger=log):
        if args.experiments_workers and args.experiments_workers > 1:
            import concurrent.futures as _cf

            with _cf.ThreadPoolExecutor(max_workers=args.experiments_workers) as ex:
                rows = list(ex.map(_run_one, list(enumerate(combos))))
        else:
            rows = [_run_one((i, vals)) for i, vals in enumerate(combos)]

    big = pd.DataFrame.from_records(rows).sort_values("point", ignore_index=True)
    written = write_table(big, os.path.join(out_dir, "sweep.csv"), base_cfg["output"]["format"])

    # one plot series per numeric summary column against the first grid key
    series = []
    if grid:
        xkey = next(iter(grid))
        ok = big[big["exit_code"] == 0]
        x = pd.to_numeric(ok[xkey], errors="coerce")
        for col in ok.columns:
            if col in grid or col in {"point", "exit_code", "error", "seed_root"}:
                continue
            y = pd.to_numeric(ok[col], errors="coerce")
            if y.notna().any() and ok[col].dtype != bool:
                series.append((col, x, y))
    emit_plot_data(series, os.path.join(out_dir, "plot_data.csv"))

    write_manifest(
        out_dir,
        {"experiment": name, "base_config": base_cfg, "grid": grid, "points": len(combos),
         "failed": int((big["exit_code"] != 0).sum())},
    )
    log_provenance(log, extra={"rows": int(len(big)), "points": len(combos), "out": written})
    log.info(f"[done] wrote {written} ({len(big)} rows)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
