from __future__ import annotations
from typing import TYPE_CHECKING, Any, Protocol, TypedDict

if TYPE_CHECKING:
    import numpy as np

    from .divisors import FrequencySet
    from .reducibility import QuasiPeriodicPotential

# ---------- Registry protocols ----------


class PotentialFactory(Protocol):
    def __call__(self, n: int = 1, **kwargs: Any) -> QuasiPeriodicPotential:
        """Named potential V(theta, x) with n angles."""


class FrequencyModel(Protocol):
    def __call__(self, omega: np.ndarray, J: int, **kwargs: Any) -> FrequencySet: ...


class Experiment(Protocol):
    def __call__(self, cfg: dict, **kwargs: Any) -> dict[str, Any]:
        """Run one experiment; returns {table_name: DataFrame, ..., "summary": dict}."""


# ---------- Output row types ----------


class TraceRow(TypedDict, total=False):
    nu: int
    eps_majorant: float
    eps_next: float
    eps_plus: float
    alpha_nu: float
    sigma_nu: float
    K_nu: int
    min_divisor: float
    freq_drift: float
    seconds: float
    tail: float
    gate: float
    gate_ok: bool


class MeasureRow(TypedDict, total=False):
    alpha: float
    fraction_excluded: float
    samples: int
    seed: int
    K: int
    J: int
    tau: float


class SpectrumRow(TypedDict, total=False):
    j: int
    nu: float
    xi: float
    lam: float
    first_order: float
    remainder: float
    ratio: float


class VariationalRow(TypedDict, total=False):
    k: int
    restart: int
    energy: float
    lam: float
    residual: float
    residual_unconstrained: float
    iterations: int
    converged: bool
