"""
I/O: full-precision tables, the run manifest, coefficient and map dumps, and
long-format plot data.
"""

from __future__ import annotations
from typing import Any, Dict, Iterable, Mapping
import json
import os
import platform
import socket
import subprocess
import shutil
import numpy as np
import pandas as pd

from .hamiltonian import TaylorHamiltonian, from_text, to_text
from .lie import SymplecticMap
from .utils.logging import _jsonable
from .utils.version import package_version

FLOAT_FORMAT = "%.17g"


def write_table(df: pd.DataFrame, out_path: str, fmt: str = "csv") -> str:
    """
    Write `df` to `out_path` (fmt = csv|parquet) and return the written path.
    CSV floats carry 17 significant digits; parquet falls back to CSV when
    pyarrow is unavailable.
    """
    fmt = (fmt or "csv").lower()
    base, ext = os.path.splitext(out_path)
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    if fmt == "parquet":
        try:
            import pyarrow  # noqa: F401

            path = base + ".parquet" if ext.lower() not in {".parq", ".parquet"} else out_path
            df.to_parquet(path, index=False)
            return path
        except ImportError:
            pass
    path = base + ".csv" if ext.lower() != ".csv" else out_path
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _git_info() -> Dict[str, Any]:
    if not shutil.which("git"):
        return {"git": False}
    try:
        commit = subprocess.check_output(
            ["git", "rev-parse", "HEAD"], text=True, stderr=subprocess.DEVNULL
        ).strip()
        status = subprocess.check_output(
            ["git", "status", "--porcelain"], text=True, stderr=subprocess.DEVNULL
        )
        return {"git": True, "commit": commit, "dirty": bool(status.strip())}
    except (OSError, subprocess.CalledProcessError):
        return {"git": False}


def _version(mod: str) -> str:
    try:
        return getattr(__import__(mod), "__version__", "unknown")
    except ImportError:
        return "missing"


def provenance(extra: Dict[str, Any] | None = None) -> Dict[str, Any]:
    info = {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "hostname": socket.gethostname(),
        "hokam": package_version(),
        "packages": {m: _version(m) for m in ("numpy", "scipy", "pandas", "yaml", "pyarrow", "numba")},
        "git": _git_info(),
    }
    if extra:
        info.update(extra)
    return info


def write_manifest(out_dir: str, payload: Mapping[str, Any]) -> str:
    """manifest.json: config echo, seeds, version, wall time, summary, provenance."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump({**payload, "provenance": provenance()}, f, indent=2, default=_jsonable)
    return path


# ---- coefficient and map dumps ----


def dump_hamiltonian(H: TaylorHamiltonian, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_text(H))
    return path


def load_hamiltonian(path: str) -> TaylorHamiltonian:
    with open(path, "r", encoding="utf-8") as f:
        return from_text(f.read())


def map_frame(phi: SymplecticMap) -> pd.DataFrame:
    """One row per (grid point, a, b) entry of L(theta) with the translation alongside."""
    P, m = phi.size, 2 * phi.J
    p, a, b = np.meshgrid(np.arange(P), np.arange(m), np.arange(m), indexing="ij")
    L = phi.L.reshape(-1)
    df = pd.DataFrame({"point": p.ravel(), "row": a.ravel(), "col": b.ravel(), "re": L.real, "im": L.imag})
    for i in range(phi.n):
        df[f"theta{i + 1}"] = phi.grid.points[df["point"].to_numpy(), i]
    c = phi.translation[df["point"].to_numpy(), df["row"].to_numpy()]
    df["shift_re"] = c.real
    df["shift_im"] = c.imag
    return df


def dump_map(phi: SymplecticMap, path: str, fmt: str = "csv") -> str:
    return write_table(map_frame(phi), path, fmt)


# ---- plot data ----


def emit_plot_data(
    series: Iterable[tuple[str, Iterable[float], Iterable[float]]], path: str
) -> str:
    """Long-format (series, x, y) CSV; an empty input writes the header only."""
    parts = [
        pd.DataFrame({"series": name, "x": np.asarray(list(x), dtype=float), "y": np.asarray(list(y), dtype=float)})
        for name, x, y in series
    ]
    df = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=["series", "x", "y"])
    return write_table(df, path, "csv")


def trace_series(trace: pd.DataFrame, name: str = "log10_eps") -> tuple[str, np.ndarray, np.ndarray]:
    eps = trace["eps_majorant"].to_numpy(dtype=float)
    with np.errstate(divide="ignore"):
        return name, trace["nu"].to_numpy(dtype=float), np.log10(eps)
