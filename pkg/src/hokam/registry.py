from __future__ import annotations

from typing import Dict

import numpy as np

from .divisors import FrequencySet
from .reducibility import QuasiPeriodicPotential
from .types import Experiment, FrequencyModel, PotentialFactory

# Internal registries
_POT: Dict[str, PotentialFactory] = {}
_FREQ: Dict[str, FrequencyModel] = {}
_EXP: Dict[str, Experiment] = {}


# ----- registration decorators -----
def register_potential(name: str):
    def _wrap(fn: PotentialFactory):
        _POT[str(name)] = fn
        return fn

    return _wrap


def register_frequency_model(name: str):
    def _wrap(fn: FrequencyModel):
        _FREQ[str(name)] = fn
        return fn

    return _wrap


def register_experiment(name: str):
    def _wrap(fn: Experiment):
        _EXP[str(name)] = fn
        return fn

    return _wrap


# ----- built-in potentials V(theta, x) -----
@register_potential("cos_theta")
def cos_theta(n: int = 1, amplitude: float = 1.0) -> QuasiPeriodicPotential:
    """amplitude * cos(theta_1), independent of x."""
    return QuasiPeriodicPotential(
        n=n,
        fn=lambda th, x: amplitude * np.cos(th[:, :1]) * np.ones((1, x.size)),
        name="cos_theta",
        x_independent=True,
    )


@register_potential("cos_theta_decay")
def cos_theta_decay(n: int = 1, amplitude: float = 1.0, delta: float = 1.0) -> QuasiPeriodicPotential:
    """amplitude * cos(theta_1) (1 + x^2)^(-delta)."""
    return QuasiPeriodicPotential(
        n=n,
        fn=lambda th, x: amplitude * np.cos(th[:, :1]) * (1.0 + x[None, :] ** 2) ** (-delta),
        name="cos_theta_decay",
        decay_C=abs(amplitude),
        decay_delta=delta,
    )


@register_potential("two_harmonics")
def two_harmonics(n: int = 1, b: float = 0.5) -> QuasiPeriodicPotential:
    """cos(theta_1) + b cos(2 theta_1), independent of x."""
    return QuasiPeriodicPotential(
        n=n,
        fn=lambda th, x: (np.cos(th[:, :1]) + b * np.cos(2.0 * th[:, :1])) * np.ones((1, x.size)),
        name="two_harmonics",
        x_independent=True,
    )


@register_potential("zero")
def zero(n: int = 1) -> QuasiPeriodicPotential:
    return QuasiPeriodicPotential(
        n=n, fn=lambda th, x: np.zeros((th.shape[0], x.size)), name="zero", x_independent=True
    )


# ----- built-in frequency models -----
@register_frequency_model("constant_gap")
def constant_gap(omega: np.ndarray, J: int) -> FrequencySet:
    """Omega_j = 2j - 1."""
    return FrequencySet(np.atleast_1d(omega).astype(float), 2.0 * np.arange(1, J + 1) - 1.0, 2.0, 0.0)


@register_frequency_model("perturbed_gap")
def perturbed_gap(omega: np.ndarray, J: int, shift: float = 0.1) -> FrequencySet:
    """Omega_j = 2j - 1 + shift / j; beyond J the gap law is exact up to shift / J."""
    j = np.arange(1, J + 1, dtype=float)
    return FrequencySet(np.atleast_1d(omega).astype(float), 2.0 * j - 1.0 + shift / j, 2.0, abs(shift) / J)


# ----- getters -----
def _lazy_import_experiments() -> None:
    # experiments register themselves on import
    from . import experiments as _  # noqa: F401


def get_potential(name: str) -> PotentialFactory:
    fn = _POT.get(name)
    if fn is None:
        raise KeyError(f"unknown potential: {name!r}")
    return fn


def get_frequency_model(name: str) -> FrequencyModel:
    fn = _FREQ.get(name)
    if fn is None:
        raise KeyError(f"unknown frequency model: {name!r}")
    return fn


def get_experiment(name: str) -> Experiment:
    fn = _EXP.get(name)
    if fn is None:
        _lazy_import_experiments()
        fn = _EXP.get(name)
    if fn is None:
        raise KeyError(f"unknown experiment: {name!r}")
    return fn


# ----- listings -----
def list_potentials() -> list[str]:
    return sorted(_POT.keys())


def list_frequency_models() -> list[str]:
    return sorted(_FREQ.keys())


def list_experiments() -> list[str]:
    _lazy_import_experiments()
    return sorted(_EXP.keys())
