"""
hokam: numerical KAM normal forms for the quantum harmonic oscillator.

Public surface (stable):
- hokam.engine.run(freqs, P0, schedule, ...) -> KamRunResult
- hokam.reducibility.reduce(V, omega, eps, schedule, J=...) -> ReducibilityResult
- hokam.nls.perturbed_spectrum / build_P / nls_kam_run
- hokam.variational.minimize(problem, seed) -> VariationalResult
- hokam.params.load_config(path_or_dict) -> dict
"""

from __future__ import annotations

from . import engine, params, rng, types  # re-export modules
from .utils.version import package_version

__all__ = ["engine", "params", "rng", "types"]
__version__ = package_version()
