"""
Homological equation  {F, N} + N_hat = R  for degree <= 2 perturbations.

With {mono, N} = i (k.omega + (q - qb).Omega) mono, each key of R off the
normal-form diagonal is divided by i * delta; the diagonal keys (y_i and
z_j zbar_j at k = 0) form N_hat = [R] and the constant is kept apart.
"""

from __future__ import annotations
from dataclasses import dataclass, field
import numpy as np

from .divisors import FrequencySet
from .errors import NonRealFrequency, ResonantDivisor
from .hamiltonian import (
    NormParams,
    TaylorHamiltonian,
    majorant_norm,
    normal_form,
    normal_mask,
    poisson_bracket,
    split_row,
)
from .utils.logging import get_logger

log = get_logger("hokam.homological")


@dataclass(frozen=True, eq=False)
class HomologicalSolution:
    F: TaylorHamiltonian
    N_hat: TaylorHamiltonian
    constant: complex = 0j
    min_divisor: float = np.inf
    skipped: list = field(default_factory=list)


def divisors_of(R: TaylorHamiltonian, freqs: FrequencySet) -> np.ndarray:
    """k.omega + (q - qb).Omega per key, accumulated in extended precision."""
    if (R.n, R.J) != (freqs.n, freqs.J):
        raise ValueError(f"frequency set (n={freqs.n}, J={freqs.J}) does not match H (n={R.n}, J={R.J})")
    w = freqs.omega.astype(np.longdouble)
    W = freqs.Omega.astype(np.longdouble)
    kw = (R.k.astype(np.longdouble) * w[None, :]).sum(axis=1)
    lW = ((R.q - R.qb).astype(np.longdouble) * W[None, :]).sum(axis=1)
    return kw + lW


def _thresholds(R: TaylorHamiltonian, alpha: float, tau: float) -> np.ndarray:
    J = R.J
    modes = np.arange(1, J + 1)
    bracket = 1.0 + np.abs((R.q - R.qb) @ modes).astype(float)
    l1 = np.abs(R.k).sum(axis=1).astype(float)
    return alpha * bracket / (1.0 + l1**tau)


def solve(
    R: TaylorHamiltonian,
    freqs: FrequencySet,
    alpha: float,
    tau: float,
    K: int | None = None,
    *,
    strict: bool = True,
) -> HomologicalSolution:
    """
    Coefficientwise solution normalized by [F] = 0. Keys with |k|_inf > K are
    ignored (they belong to the truncation tail). A divisor below its threshold
    raises ResonantDivisor; with strict=False the key is skipped and listed.
    """
    if R.nnz and np.max(R.weighted_degree) > 2:
        raise ValueError("homological solve expects weighted degree <= 2")
    if K is not None:
        R, _ = R.restrict(K=K)

    k0 = ~np.any(R.k != 0, axis=1)
    const_mask = k0 & (R.weighted_degree == 0)
    nf_mask = normal_mask(R)
    rest = ~(const_mask | nf_mask)

    constant = complex(np.sum(R.coeffs[const_mask]))
    N_hat = R.select(nf_mask).with_caps(K=0)

    delta = divisors_of(R, freqs)[rest]
    thr = _thresholds(R, alpha, tau)[rest]
    rows = np.flatnonzero(rest)
    bad = (np.abs(delta) < thr) | (delta == 0)
    skipped = []
    if np.any(bad):
        i = int(np.flatnonzero(bad)[np.argmin((np.abs(delta) / np.maximum(thr, 1e-300))[bad])])
        key = split_row(R.exps[rows[i]], R.n, R.J)
        if strict:
            raise ResonantDivisor(key, float(abs(delta[i])), float(thr[i]))
        skipped = [split_row(R.exps[r], R.n, R.J) for r in rows[bad]]
        log.warning(f"[homological] skipped {len(skipped)} resonant keys, worst {key}")
    use = ~bad
    coeffs = (R.coeffs[rest][use].astype(np.clongdouble) / (1j * delta[use])).astype(complex)
    F = TaylorHamiltonian(R.n, R.J, R.K, 2, R.exps[rows[use]], coeffs)
    min_div = float(np.min(np.abs(delta[use]))) if np.any(use) else np.inf
    return HomologicalSolution(F, N_hat, constant, min_div, skipped)


def residual(sol: HomologicalSolution, R: TaylorHamiltonian, freqs: FrequencySet) -> TaylorHamiltonian:
    """{F, N} + N_hat + constant - R."""
    N = normal_form(freqs.omega, freqs.Omega)
    out = poisson_bracket(sol.F, N, 2, K=max(R.K, sol.F.K)) + sol.N_hat - R
    if sol.constant != 0:
        const = TaylorHamiltonian.from_arrays(R.n, R.J, np.zeros((1, 2 * R.n + 2 * R.J)), [sol.constant], K=0, D=0)
        out = out + const
    return out


def verify(
    sol: HomologicalSolution,
    R: TaylorHamiltonian,
    freqs: FrequencySet,
    norm: NormParams | None = None,
) -> float:
    """Majorant of the homological defect."""
    return majorant_norm(residual(sol, R, freqs), norm or NormParams()).total


def frequency_update(N_hat: TaylorHamiltonian, *, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """(d_omega, d_Omega) read off the y_i and z_j zbar_j coefficients of N_hat."""
    n, J = N_hat.n, N_hat.J
    d_omega = np.zeros(n, dtype=complex)
    d_Omega = np.zeros(J, dtype=complex)
    mask = normal_mask(N_hat)
    if np.any(~mask):
        raise ValueError("frequency_update expects a normal-form Hamiltonian")
    for row, c in zip(N_hat.exps, N_hat.coeffs):
        m = row[n : 2 * n]
        if m.any():
            d_omega[int(np.argmax(m))] += c
        else:
            d_Omega[int(np.argmax(row[2 * n : 2 * n + J]))] += c
    for name, v in (("omega", d_omega), ("Omega", d_Omega)):
        bad = np.abs(v.imag) > tol * np.maximum(1.0, np.abs(v))
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise NonRealFrequency(f"{name} correction {j + 1} has imaginary part {v[j].imag:.3e}")
    return d_omega.real.copy(), d_Omega.real.copy()


def decay_constant(
    sol: HomologicalSolution, R: TaylorHamiltonian, alpha: float, norm: NormParams
) -> float:
    """alpha * <F>^+ / <R>: the observed constant of the divisor-loss estimate."""
    rR = majorant_norm(R, norm).total
    if rR == 0:
        return 0.0
    rF = majorant_norm(sol.F, norm)
    return float(alpha * max(rF.total, rF.zz_plus_part) / rR)
