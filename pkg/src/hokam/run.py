#!/usr/bin/env python
from __future__ import annotations
import argparse
import json
import os
import time
from typing import Any, Dict, Mapping

import pandas as pd
import yaml

from . import params
from .errors import ConfigError, HokamError
from .hamiltonian import TaylorHamiltonian
from .io import dump_hamiltonian, dump_map, emit_plot_data, write_manifest, write_table
from .lie import SymplecticMap
from .registry import get_experiment, list_experiments, list_frequency_models, list_potentials
from .backends import list_backends
from .utils.logging import get_logger, log_provenance
from .utils.profiling import Timer, profile_if_env
from .utils.version import package_version


def _set_nested(cfg: Dict[str, Any], dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    d = cfg
    for p in parts[:-1]:
        d = d.setdefault(p, {})
        if not isinstance(d, dict):
            raise ConfigError(f"{dotted_key}: {p} is not a section")
    d[parts[-1]] = value


def _raw_config(path: str | None) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    return raw


def _apply_overrides(raw: Dict[str, Any], args: argparse.Namespace) -> Dict[str, Any]:
    if args.experiment:
        _set_nested(raw, "meta.experiment", args.experiment)
    if args.backend:
        _set_nested(raw, "execution.backend", args.backend)
    if args.threads is not None:
        _set_nested(raw, "execution.threads", int(args.threads))
    if args.seed is not None:
        _set_nested(raw, "meta.seed_root", int(args.seed))
    if args.strict:
        _set_nested(raw, "meta.strict_gate", True)
    if args.out_format:
        _set_nested(raw, "output.format", args.out_format)

    # variational shortcuts
    for key in ("mu", "p", "count"):
        v = getattr(args, key, None)
        if v is not None:
            _set_nested(raw, f"variational.{key}", v)

    # generic KEY=VALUE overrides, values parsed as YAML scalars/lists
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set must be KEY=VALUE, got: {item}")
        key, value = item.split("=", 1)
        _set_nested(raw, key.strip(), yaml.safe_load(value))
    return raw


def run_experiment(cfg: Mapping[str, Any]) -> Dict[str, Any]:
    """Run the configured experiment and return its result bundle."""
    fn = get_experiment(cfg["meta"]["experiment"])
    return fn(dict(cfg))


def write_outputs(
    result: Mapping[str, Any], cfg: Mapping[str, Any], out_dir: str, wall_time: float
) -> Dict[str, str]:
    """Tables, plot data, requested dumps and manifest.json under `out_dir`."""
    fmt = cfg["output"]["format"]
    written: Dict[str, str] = {}
    for name, obj in result.items():
        if isinstance(obj, pd.DataFrame):
            written[name] = write_table(obj, os.path.join(out_dir, f"{name}.csv"), fmt)
    written["plot_data"] = emit_plot_data(result.get("plots", []), os.path.join(out_dir, "plot_data.csv"))

    dumps = result.get("dumps", {})
    for name, obj in dumps.items():
        if isinstance(obj, TaylorHamiltonian) and cfg["output"]["dump_coefficients"]:
            written[f"dump_{name}"] = dump_hamiltonian(obj, os.path.join(out_dir, f"{name}.txt"))
        elif isinstance(obj, SymplecticMap) and (
            cfg["reduce"]["dump_map"] or cfg["output"]["dump_coefficients"]
        ):
            written[f"dump_{name}"] = dump_map(obj, os.path.join(out_dir, f"{name}.csv"), fmt)

    write_manifest(
        out_dir,
        {
            "experiment": cfg["meta"]["experiment"],
            "version": package_version(),
            "seed_root": cfg["meta"]["seed_root"],
            "wall_time": wall_time,
            "config": cfg,
            "summary": result.get("summary", {}),
            "files": {k: os.path.basename(v) for k, v in written.items()},
        },
    )
    return written


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hokam-run",
        description="Run one KAM normal-form experiment and write its tables and manifest.",
    )
    ap.add_argument(
        "experiment", nargs="?", choices=list(params.EXPERIMENTS),
        help="Experiment to run (overrides meta.experiment)",
    )
    ap.add_argument("-c", "--config", help="Path to YAML config")
    ap.add_argument("-o", "--out", help="Output directory (default: $HOKAM_OUT/<experiment>)")
    ap.add_argument("--out-format", choices=["csv", "parquet"], help="Override output format")
    ap.add_argument("--backend", choices=list_backends(), help="Execution backend")
    ap.add_argument("--threads", type=int, help="Worker cap for the scale backend")
    ap.add_argument("--seed", type=int, help="Seed root (deterministic)")
    ap.add_argument("--strict", action="store_true", help="Gate and certification failures are errors")
    ap.add_argument("--mu", type=float, help="variational.mu")
    ap.add_argument("--p", type=float, help="variational.p")
    ap.add_argument("--count", type=int, help="variational.count")
    ap.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help='Dotted config override, e.g. --set "reduce.epsilon=0.02"',
    )
    ap.add_argument("--list", action="store_true", help="List experiments, potentials, models and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


@profile_if_env
def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    log = get_logger("hokam.run", level="DEBUG" if args.verbose else "INFO")

    if args.list:
        payload = {
            "experiments": list_experiments(),
            "backends": list_backends(),
            "potentials": list_potentials(),
            "frequency_models": list_frequency_models(),
        }
        log.info(json.dumps(payload, indent=2))
        return 0

    try:
        cfg = params.load_config(_apply_overrides(_raw_config(args.config), args))
        name = cfg["meta"]["experiment"]
        out_dir = args.out or os.path.join(params.output_root(cfg), name)

        t0 = time.perf_counter()
        with Timer(f"experiment {name}", logger=log):
            result = run_experiment(cfg)
        written = write_outputs(result, cfg, out_dir, time.perf_counter() - t0)
    except HokamError as e:
        log.error(f"[error] {type(e).__name__}: {e}")
        return e.exit_code
    except (KeyError, ValueError) as e:
        log.error(f"[error] {type(e).__name__}: {e}")
        return 1

    log_provenance(log, extra={"experiment": name, "out": out_dir})
    log.info(f"[done] wrote {len(written)} file(s) to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
