from __future__ import annotations
from typing import Any, Mapping
from copy import deepcopy
import os
import pathlib as _p
import yaml

from .errors import ConfigError

EXPERIMENTS = ("reduce", "oracle", "spectrum", "nls", "variational", "measure")

_DEFAULTS: dict[str, Any] = {
    "meta": {"experiment": None, "seed_root": 20261019, "strict_gate": False},
    "execution": {"backend": "reference", "threads": 0, "show_progress": False},
    "basis": {"J": 32, "Q": None},
    "norm": {"s": 0.1, "r": 1.0, "beta": 0.5, "p": 2.0},
    "schedule": {
        "s0": 0.2,
        "alpha0": 0.015,
        "M0": 1.0,
        "tau": None,  # n + 3
        "t": None,  # 2 tau + n + 1
        "c0": 8.0,
        "c1": 8.0,
        "K0": 8,
        "K_limit": 64,
        "max_nu": 8,
        "target": 1e-12,
        "mode": "exact",
    },
    "reduce": {
        "omega": None,  # golden rotation 2 pi (sqrt5 - 1)/2 for n = 1
        "epsilon": 0.01,
        "potential": "cos_theta_decay",
        "potential_args": {},
        "stop": "target",
        "K_potential": None,
        "integrate_T": 50.0,
        "integrate_tol": 1e-10,
        "floquet_K": 2,
        "epsilon_scan": [],
        "dump_map": False,
    },
    "spectrum": {
        "n": 1,
        "nu": 1e-3,
        "xi": [1.0],
        "k_max": None,
        "nu_series": [1e-2, 1e-3, 1e-4],
        "j_range": [2, 16],
        "derivative_jk": [1, 1],
    },
    "nls": {
        "m": 1,
        "actions": [2.0],
        "xi": [1.0],
        "epsilon": 1e-3,
        "nu": 0.02,
        "C0": 10.0,
        "D": 4,
        "K": None,
        "steps": 4,
        "nondeg_samples": 64,
        "lipschitz_grid": None,  # xi and a neighbour at distance 0.01
    },
    "variational": {
        "mu": 0.5,
        "p": 3.0,
        "count": 3,
        "tol": 1e-6,
        "max_iter": 20000,
        "restarts": 2,
        "focusing": False,
        "focusing_eps": 0.0,
        "T": 10.0,
    },
    "measure": {
        "n": 1,
        "box": [[0.5, 2.5]],
        "alphas": [0.4, 0.2, 0.1, 0.05],
        "tau": 3.0,
        "K": 30,
        "J": 8,
        "samples": 1000,
        "omega_model": "constant_gap",
    },
    "output": {"root": None, "format": "csv", "dump_coefficients": False},
}


def _merge(a: dict, b: Mapping[str, Any], prefix: str = "") -> dict:
    out = deepcopy(a)
    for k, v in b.items():
        key = f"{prefix}{k}"
        if k not in out:
            raise ConfigError(f"unknown config key: {key}")
        if isinstance(out[k], Mapping) and k != "potential_args":
            if not isinstance(v, Mapping):
                raise ConfigError(f"{key} must be a section")
            out[k] = _merge(out[k], v, key + ".")
        else:
            out[k] = deepcopy(v)
    return out


def _positive(sec: dict, name: str, key: str, cast=float) -> None:
    try:
        sec[key] = cast(sec[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}.{key} must be a number") from e
    if not sec[key] > 0:
        raise ConfigError(f"{name}.{key} must be > 0")


def output_root(cfg: Mapping[str, Any]) -> str:
    return cfg["output"]["root"] or os.environ.get("HOKAM_OUT", "results")


def load_config(path_or_obj: str | _p.Path | Mapping[str, Any]) -> dict:
    """
    Load a YAML config (or use the given mapping), merge it over the defaults,
    reject unknown keys and normalize types.
    """
    if isinstance(path_or_obj, Mapping):
        raw = dict(path_or_obj)
    else:
        p = _p.Path(path_or_obj)
        try:
            raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {p}: {e}") from e
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a mapping of sections")
    cfg = _merge(_DEFAULTS, raw)

    meta = cfg["meta"]
    if meta["experiment"] is None:
        raise ConfigError("missing required key: meta.experiment")
    if meta["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"meta.experiment must be one of: {'|'.join(EXPERIMENTS)}")
    try:
        meta["seed_root"] = int(meta["seed_root"])
    except (TypeError, ValueError) as e:
        raise ConfigError("meta.seed_root must be an integer") from e
    meta["strict_gate"] = bool(meta["strict_gate"])

    ex = cfg["execution"]
    ex["threads"] = int(ex["threads"])
    ex["show_progress"] = bool(ex["show_progress"])

    b = cfg["basis"]
    _positive(b, "basis", "J", int)
    if b["Q"] is not None:
        b["Q"] = int(b["Q"])
        if b["Q"] < 2 * b["J"] + 2:
            raise ConfigError("basis.Q must be >= 2J+2")

    nm = cfg["norm"]
    for key in ("s", "r", "p"):
        _positive(nm, "norm", key)
    if nm["beta"] != "auto":
        _positive(nm, "norm", "beta")

    sc = cfg["schedule"]
    for key in ("s0", "alpha0", "M0", "target"):
        _positive(sc, "schedule", key)
    if sc["alpha0"] > 1:
        raise ConfigError("schedule.alpha0 must be in (0, 1]")
    for key in ("c0", "c1"):
        sc[key] = float(sc[key])
        if sc[key] < 1:
            raise ConfigError(f"schedule.{key} must be >= 1")
    for key in ("tau", "t"):
        if sc[key] is not None:
            _positive(sc, "schedule", key)
    for key in ("K0", "K_limit"):
        _positive(sc, "schedule", key, int)
    sc["max_nu"] = int(sc["max_nu"])
    if sc["max_nu"] < 0:
        raise ConfigError("schedule.max_nu must be >= 0")
    if sc["mode"] not in {"exact", "ode"}:
        raise ConfigError("schedule.mode must be 'exact' or 'ode'")

    rd = cfg["reduce"]
    if rd["omega"] is not None:
        rd["omega"] = [float(w) for w in (rd["omega"] if isinstance(rd["omega"], list) else [rd["omega"]])]
    rd["epsilon"] = float(rd["epsilon"])
    if rd["epsilon"] < 0:
        raise ConfigError("reduce.epsilon must be >= 0")
    if rd["stop"] not in {"target", "max_nu"}:
        raise ConfigError("reduce.stop must be 'target' or 'max_nu'")
    _positive(rd, "reduce", "integrate_T")
    _positive(rd, "reduce", "integrate_tol")
    if rd["integrate_tol"] > 1e-9:
        raise ConfigError("reduce.integrate_tol must be <= 1e-9")
    rd["floquet_K"] = int(rd["floquet_K"])
    rd["epsilon_scan"] = [float(e) for e in rd["epsilon_scan"]]
    rd["dump_map"] = bool(rd["dump_map"])

    sp = cfg["spectrum"]
    _positive(sp, "spectrum", "n", int)
    sp["nu"] = float(sp["nu"])
    sp["xi"] = [float(x) for x in sp["xi"]]
    if len(sp["xi"]) != sp["n"]:
        raise ConfigError("spectrum.xi must have spectrum.n entries")
    sp["nu_series"] = [float(v) for v in sp["nu_series"]]

    nl = cfg["nls"]
    _positive(nl, "nls", "m", int)
    nl["actions"] = [float(a) for a in nl["actions"]]
    if any(a <= 0 for a in nl["actions"]):
        raise ConfigError("nls.actions must be positive")
    nl["xi"] = [float(x) for x in nl["xi"]]
    if len(nl["xi"]) != len(nl["actions"]):
        raise ConfigError("nls.xi and nls.actions must have the same length")
    for key in ("epsilon", "nu", "C0"):
        nl[key] = float(nl[key])
    nl["D"] = int(nl["D"])
    if nl["D"] < 2:
        raise ConfigError("nls.D must be >= 2")
    nl["steps"] = int(nl["steps"])
    if nl["lipschitz_grid"] is not None:
        try:
            grid = [[float(x) for x in row] for row in nl["lipschitz_grid"]]
        except (TypeError, ValueError) as e:
            raise ConfigError("nls.lipschitz_grid must be a list of xi vectors") from e
        if len(grid) < 2 or any(len(row) != len(nl["xi"]) for row in grid):
            raise ConfigError("nls.lipschitz_grid needs >= 2 rows of length len(nls.xi)")
        if any(abs(x) > 1 for row in grid for x in row):
            raise ConfigError("nls.lipschitz_grid entries must lie in [-1, 1]")
        nl["lipschitz_grid"] = grid

    va = cfg["variational"]
    _positive(va, "variational", "mu")
    va["p"] = float(va["p"])
    if va["p"] < 1:
        raise ConfigError("variational.p must be >= 1")
    for key in ("count", "max_iter", "restarts"):
        _positive(va, "variational", key, int)
    _positive(va, "variational", "tol")
    va["focusing"] = bool(va["focusing"])
    va["focusing_eps"] = float(va["focusing_eps"])
    va["T"] = float(va["T"])

    ms = cfg["measure"]
    _positive(ms, "measure", "n", int)
    ms["box"] = [[float(lo), float(hi)] for lo, hi in ms["box"]]
    if len(ms["box"]) != ms["n"]:
        raise ConfigError("measure.box must have measure.n rows")
    ms["alphas"] = [float(a) for a in ms["alphas"]]
    for key in ("K", "J", "samples"):
        _positive(ms, "measure", key, int)
    if ms["samples"] < 100:
        raise ConfigError("measure.samples must be >= 100")
    ms["tau"] = float(ms["tau"])

    out = cfg["output"]
    fmt = str(out["format"]).lower()
    if fmt not in {"csv", "parquet"}:
        raise ConfigError("output.format must be 'csv' or 'parquet'")
    out["format"] = fmt
    out["dump_coefficients"] = bool(out["dump_coefficients"])
    return cfg
