"""
Exception hierarchy. Every class carries the exit code `hokam-run` returns for it.
"""

from __future__ import annotations
from typing import Any


class HokamError(Exception):
    exit_code: int = 1


class ConfigError(HokamError, ValueError):
    """Invalid, missing or unknown configuration key."""

    exit_code = 1


class SpectralError(HokamError, ValueError):
    """Invalid Hermite truncation / quadrature request."""

    exit_code = 1


# ---- resonance ----


class ResonanceExcluded(HokamError):
    """The parameter fails a non-resonance condition and must be re-sampled."""

    exit_code = 2

    def __init__(self, message: str, *, k: Any = None, l: Any = None, b: Any = None):
        super().__init__(message)
        self.k = k
        self.l = l
        self.b = b


class ResonantDivisor(ResonanceExcluded):
    def __init__(self, key: Any, value: float, threshold: float):
        super().__init__(
            f"resonant divisor {value:.3e} below threshold {threshold:.3e} at key {key}"
        )
        self.key = key
        self.value = float(value)
        self.threshold = float(threshold)


# ---- divergence ----


class DivergenceError(HokamError):
    exit_code = 3


class ContractionError(DivergenceError):
    """Perturbation majorant grew where the Newton step should contract it."""


class ConvergenceError(DivergenceError):
    """Integrator, optimizer or series did not converge."""


# ---- numerical integrity ----


class IntegrityError(HokamError):
    exit_code = 4


class SymplecticityError(IntegrityError):
    pass


class RealityError(IntegrityError):
    pass


class NonRealFrequency(IntegrityError):
    pass


class OrthogonalityError(IntegrityError):
    pass
