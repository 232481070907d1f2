"""
Parameter sequences of the Newton iteration.

    alpha_nu = alpha0/2 (1 + 2^-nu)        M_nu = M0 (2 - 2^-nu)
    sigma_0 = s0/40, sigma_{nu+1} = sigma_nu/2,  s_{nu+1} = s_nu - 5 sigma_nu
    eps_{nu+1} = c1 eps_nu^kappa / (alpha_nu sigma_nu^t)^(kappa-1)
    eta_nu^3 = eps_nu / (alpha_nu sigma_nu^t),  r_{nu+1} = eta_nu r_nu
    K_nu = K0 2^nu, K0^(tau+1) = 1/(c1 gamma0),  gamma0 = (c0 + 2^(t+3) c1)^-3
    eps_0 = gamma0 alpha0 sigma0^t
"""

from __future__ import annotations
from dataclasses import dataclass
import numpy as np
import pandas as pd

from .utils.logging import get_logger

log = get_logger("hokam.schedule")

KAPPA = 4.0 / 3.0


@dataclass(frozen=True, eq=False)
class KamSchedule:
    alpha: np.ndarray
    M: np.ndarray
    eps: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray
    s: np.ndarray
    r: np.ndarray
    K: np.ndarray
    c0: float
    c1: float
    gamma0: float
    t: float
    tau: float
    K0_theory: float
    kappa: float = KAPPA

    @property
    def lam(self) -> np.ndarray:
        return self.alpha / self.M

    @property
    def max_nu(self) -> int:
        return int(self.alpha.size - 1)

    def gate(self, nu: int, eps: float | None = None) -> float:
        """
        alpha_nu sigma_nu^(t+1) eta_nu^2 / c0, with eta_nu taken from the measured
        majorant `eps` when given instead of the scheduled eps_nu.
        """
        eta = self.eta[nu] if eps is None else np.cbrt(eps / (self.alpha[nu] * self.sigma[nu] ** self.t))
        return float(self.alpha[nu] * self.sigma[nu] ** (self.t + 1) * eta**2 / self.c0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "nu": np.arange(self.alpha.size),
                "alpha": self.alpha,
                "M": self.M,
                "lambda": self.lam,
                "eps": self.eps,
                "sigma": self.sigma,
                "eta": self.eta,
                "s": self.s,
                "r": self.r,
                "K": self.K,
            }
        )


def default_t(tau: float, n: int) -> float:
    return 2.0 * tau + n + 1.0


def make_schedule(
    s0: float,
    alpha0: float,
    M0: float,
    tau: float,
    t: float,
    c0: float = 8.0,
    c1: float = 8.0,
    max_nu: int = 12,
    *,
    r0: float = 1.0,
    K0: int | None = None,
    K_limit: int = 64,
) -> KamSchedule:
    """
    Build every sequence up to max_nu. K_nu is capped at K_limit; an explicit
    K0 replaces the theoretical value (which is astronomically large for the
    default constants).
    """
    if not s0 > 0:
        raise ValueError("schedule.s0 must be > 0")
    if not 0 < alpha0 <= 1:
        raise ValueError("schedule.alpha0 must be in (0, 1]")
    if not M0 > 0:
        raise ValueError("schedule.M0 must be > 0")
    if c0 < 1 or c1 < 1:
        raise ValueError("schedule.c0 and schedule.c1 must be >= 1")
    if max_nu < 0:
        raise ValueError("schedule.max_nu must be >= 0")

    nu = np.arange(max_nu + 1, dtype=float)
    alpha = 0.5 * alpha0 * (1.0 + 2.0**-nu)
    M = M0 * (2.0 - 2.0**-nu)
    sigma = (s0 / 40.0) * 2.0**-nu
    s = s0 - 5.0 * np.concatenate([[0.0], np.cumsum(sigma[:-1])])

    gamma0 = (c0 + 2.0 ** (t + 3.0) * c1) ** -3.0
    eps = np.empty(max_nu + 1)
    eps[0] = gamma0 * alpha0 * sigma[0] ** t
    for v in range(max_nu):
        eps[v + 1] = c1 * eps[v] ** KAPPA / (alpha[v] * sigma[v] ** t) ** (KAPPA - 1.0)
    eta = np.cbrt(eps / (alpha * sigma**t))
    r = r0 * np.concatenate([[1.0], np.cumprod(eta[:-1])])

    K0_theory = float((c1 * gamma0) ** (-1.0 / (tau + 1.0)))
    base = float(K0) if K0 is not None else K0_theory
    with np.errstate(over="ignore"):
        K_free = base * 2.0**nu
    capped = np.flatnonzero(K_free > K_limit)
    if capped.size:
        log.warning(
            f"[schedule] K_nu capped at K_limit={K_limit} from nu={int(capped[0])} "
            f"(uncapped value {K_free[capped[0]]:.3g})"
        )
    K = np.maximum(np.floor(np.minimum(K_free, float(K_limit))), 1).astype(np.int64)

    return KamSchedule(
        alpha=alpha, M=M, eps=eps, sigma=sigma, eta=eta, s=s, r=r, K=K,
        c0=float(c0), c1=float(c1), gamma0=float(gamma0), t=float(t), tau=float(tau),
        K0_theory=K0_theory,
    )
