"""
Nonlinear oscillator  i u_t + u_xx - x^2 u - nu V(xi, x) u = eps |u|^{2m} u.

Potential family on Pi = [-1, 1]^n:

    V(xi, x) = sum_k xi_k f_k(x) + xi_1 g(x),
    f_k in span(h_1^2..h_n^2) with int f_k h_j^2 = delta_kj,
    g(x) = sum_{k=n+1}^{k_max} alpha_k e^{-k} h_{2k-1}(sqrt2 x),  alpha_k in [-1/2, 1/2].

Eigenpairs of T + nu V give internal frequencies lambda_1..lambda_n and normal
frequencies Lambda_j = lambda_{n+j}. The perturbation is P = eps int |u|^{2(m+1)} with

    u = sum_j (y_j + I_j)^{1/2} e^{i theta_j} phi_j + sum_j z_j phi_{j+n}.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence
import numpy as np
import pandas as pd
from scipy.linalg import eigh
from scipy.special import binom, comb
from scipy.stats import linregress

from .backends import get_backend
from .divisors import FrequencySet, certify
from .engine import KamRunResult, kam_step, run
from .errors import ResonanceExcluded, SpectralError
from .fourier import ThetaGrid, kvectors
from .hamiltonian import (
    NormParams,
    TaylorHamiltonian,
    lipschitz_seminorm,
    majorant_norm,
    resonant_part,
    taylor_truncate,
)
from .hermite import SpectralBasis, assemble_bilinear, hermite_functions, quadrature_rule
from .rng import RngBundle
from .schedule import KamSchedule
from .types import SpectrumRow
from .utils.logging import get_logger
from .utils.profiling import Timer

log = get_logger("hokam.nls")


# ---- potential family ----


def dual_basis(n: int, basis: SpectralBasis) -> np.ndarray:
    """
    C (n, n) with f_j = sum_i C[i, j] h_i^2 and int f_j h_k^2 = delta_jk.
    Gram entries int h_i^2 h_k^2 use the scale-2 rule (exact for quartics).
    """
    if n < 1:
        raise ValueError("nls.n must be >= 1")
    if n > basis.J:
        raise SpectralError(f"dual basis needs n <= J (n={n}, J={basis.J})")
    x, w = quadrature_rule(basis, 2.0)
    H2 = hermite_functions(n, x) ** 2
    G = (H2 * w) @ H2.T
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > 1e12:
        raise SpectralError(f"singular Gram matrix of Hermite squares (cond={cond:.2e})")
    return np.linalg.solve(G, np.eye(n))


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    n: int
    dual: np.ndarray  # (n, n), see dual_basis
    alpha: np.ndarray  # alpha_k for k = n+1..k_max
    k_max: int
    seed: int | None = None

    def f_values(self, x: np.ndarray) -> np.ndarray:
        """(n, X) samples of f_1..f_n."""
        return self.dual.T @ (hermite_functions(self.n, x) ** 2)

    def g_values(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.k_max <= self.n:
            return np.zeros_like(x)
        k = np.arange(self.n + 1, self.k_max + 1)
        h = hermite_functions(2 * self.k_max - 1, np.sqrt(2.0) * x)[2 * k - 2]
        return (self.alpha * np.exp(-k.astype(float))) @ h

    def component(self, k: int, x: np.ndarray) -> np.ndarray:
        """f_k + delta_1k g."""
        v = self.f_values(x)[k - 1]
        return v + self.g_values(x) if k == 1 else v

    def values(self, xi: Sequence[float], x: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return xi @ self.f_values(x) + xi[0] * self.g_values(x)


def make_family(n: int, basis: SpectralBasis, seed: int | None, k_max: int | None = None) -> PotentialFamily:
    k_max = basis.J if k_max is None else int(k_max)
    rng = RngBundle(seed).for_family(k_max)
    alpha = rng.uniform(-0.5, 0.5, size=max(k_max - n, 0))
    return PotentialFamily(n=n, dual=dual_basis(n, basis), alpha=alpha, k_max=k_max, seed=seed)


def _check_xi(xi: Sequence[float], n: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.size != n:
        raise ValueError(f"nls.xi must have n={n} entries")
    if np.any(np.abs(xi) > 1.0):
        raise ValueError("nls.xi must lie in [-1, 1]^n")
    return xi


def _bilinear(basis: SpectralBasis, fn) -> np.ndarray:
    # V h_j h_l decays like exp(-2x^2) times a polynomial
    x, _ = quadrature_rule(basis, 2.0)
    return assemble_bilinear(basis, fn(x), scale=2.0)


# ---- spectrum ----


@dataclass(frozen=True, eq=False)
class PerturbedSpectrum:
    lam: np.ndarray
    phi: np.ndarray  # columns are eigenvectors in Hermite coefficients
    nu: float
    xi: np.ndarray

    @property
    def J(self) -> int:
        return self.lam.size

    def split(self, n: int) -> FrequencySet:
        return FrequencySet(self.lam[:n].copy(), self.lam[n:].copy(), 2.0, 0.0)

    def orthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.phi.T @ self.phi - np.eye(self.J))))


def perturbed_spectrum(
    family: PotentialFamily, nu: float, xi: Sequence[float], basis: SpectralBasis
) -> PerturbedSpectrum:
    if nu < 0:
        raise ValueError("nls.nu must be >= 0")
    xi = _check_xi(xi, family.n)
    A = np.diag(basis.eigenvalues)
    if nu > 0:
        A = A + nu * _bilinear(basis, lambda x: family.values(xi, x))
    try:
        lam, phi = eigh(A)
    except np.linalg.LinAlgError as e:
        raise SpectralError(f"eigensolver failed at nu={nu}, xi={xi.tolist()}: {e}") from e
    sign = np.where(np.diag(phi) < 0, -1.0, 1.0)
    phi = phi * sign[None, :]
    if np.any(np.diff(lam) <= 0):
        raise SpectralError("perturbed eigenvalues are not strictly increasing")
    return PerturbedSpectrum(lam, phi, float(nu), xi)


def first_order_slopes(family: PotentialFamily, xi: Sequence[float], basis: SpectralBasis) -> np.ndarray:
    """int V(xi) h_j^2, so lambda_j = 2j - 1 + nu * slope_j + o(nu)."""
    xi = _check_xi(xi, family.n)
    return np.diag(_bilinear(basis, lambda x: family.values(xi, x))).copy()


def frequency_derivative_check(
    family: PotentialFamily,
    nu: float,
    xi: Sequence[float],
    j: int,
    k: int,
    basis: SpectralBasis,
    h: float = 1e-4,
) -> tuple[float, float]:
    """(nu int (f_k + delta_1k g) phi_j^2, central difference of lambda_j in xi_k)."""
    xi = _check_xi(xi, family.n)
    sp = perturbed_spectrum(family, nu, xi, basis)
    B = _bilinear(basis, lambda x: family.component(k, x))
    v = sp.phi[:, j - 1]
    analytic = float(nu * v @ B @ v)
    e = np.zeros(family.n)
    e[k - 1] = h
    up = perturbed_spectrum(family, nu, np.clip(xi + e, -1, 1), basis).lam[j - 1]
    dn = perturbed_spectrum(family, nu, np.clip(xi - e, -1, 1), basis).lam[j - 1]
    span = float(np.clip(xi + e, -1, 1)[k - 1] - np.clip(xi - e, -1, 1)[k - 1])
    return analytic, float((up - dn) / span)


def spectrum_table(
    family: PotentialFamily,
    xi: Sequence[float],
    nus: Sequence[float],
    basis: SpectralBasis,
    j_max: int | None = None,
) -> pd.DataFrame:
    """lambda_j(nu) against its first-order prediction for every nu in the series."""
    xi = _check_xi(xi, family.n)
    j_max = basis.J // 2 if j_max is None else int(j_max)
    slopes = first_order_slopes(family, xi, basis)
    rows: list[SpectrumRow] = []
    for nu in nus:
        lam = perturbed_spectrum(family, float(nu), xi, basis).lam
        for j in range(1, j_max + 1):
            pred = 2.0 * j - 1.0 + nu * slopes[j - 1]
            # internal modes: lambda_j = 2j - 1 + nu xi_j + o(nu)
            lead = 2.0 * j - 1.0 + nu * xi[j - 1] if j <= family.n else np.nan
            rows.append(
                {
                    "j": j, "nu": float(nu), "xi": float(xi[0]), "lam": float(lam[j - 1]),
                    "first_order": float(pred), "remainder": float(lam[j - 1] - pred),
                    "ratio": float(abs(lam[j - 1] - lead) / nu) if nu > 0 else np.nan,
                }
            )
    cols = ["j", "nu", "xi", "lam", "first_order", "remainder", "ratio"]
    return pd.DataFrame.from_records(rows, columns=cols)


def eigenfunction_decay(
    family: PotentialFamily,
    nu: float,
    xi: Sequence[float],
    basis: SpectralBasis,
    j_range: tuple[int, int] = (2, 16),
) -> tuple[pd.DataFrame, float]:
    """|phi_j - h_j|_l2 / nu over j_range and its log-log slope."""
    sp = perturbed_spectrum(family, nu, xi, basis)
    j = np.arange(j_range[0], j_range[1] + 1)
    dist = np.linalg.norm(sp.phi[:, j - 1] - np.eye(basis.J)[:, j - 1], axis=0) / nu
    slope = float(linregress(np.log(j), np.log(dist)).slope)
    return pd.DataFrame({"j": j, "distance": dist}), slope


def eigenvalue_lipschitz(
    family: PotentialFamily,
    nu: float,
    basis: SpectralBasis,
    pairs: int = 16,
    seed: int | None = 0,
) -> tuple[pd.DataFrame, float]:
    """
    max |lambda_j(xi) - lambda_j(eta)| / |xi - eta| over random pairs in Pi,
    with the log-log slope of the constant over j in [n+1, J/2].
    """
    rngs = RngBundle(seed)
    best = np.zeros(basis.J)
    for i in range(pairs):
        g = rngs.for_point(i)
        a, b = g.uniform(-1, 1, family.n), g.uniform(-1, 1, family.n)
        d = float(np.linalg.norm(a - b))
        if d == 0:
            continue
        la = perturbed_spectrum(family, nu, a, basis).lam
        lb = perturbed_spectrum(family, nu, b, basis).lam
        best = np.maximum(best, np.abs(la - lb) / d)
    j = np.arange(1, basis.J + 1)
    sel = (j > family.n) & (j <= basis.J // 2) & (best > 0)
    slope = float(linregress(np.log(j[sel]), np.log(best[sel])).slope) if sel.sum() >= 2 else float("nan")
    return pd.DataFrame({"j": j, "lipschitz": best}), slope


# ---- non-degeneracy ----


def mu_expansion(basis: SpectralBasis, J: int | None = None) -> tuple[np.ndarray, float]:
    """
    mu[k-1, j-1] with h_j^2(x) = sum_{k<=j} mu_kj h_{2k-1}(sqrt2 x), by quadrature
    against h_{2k-1}(sqrt2 x) (whose squares integrate to 1/sqrt2), plus the max
    reconstruction error on a test grid.
    """
    J = basis.J if J is None else int(J)
    x, w = quadrature_rule(basis, 2.0)
    Hj = hermite_functions(J, x) ** 2
    Hk = hermite_functions(2 * J - 1, np.sqrt(2.0) * x)[0::2]
    mu = np.sqrt(2.0) * (Hk * w) @ Hj.T
    mu = np.triu(mu)
    t = np.linspace(-4.0, 4.0, 161)
    recon = mu.T @ hermite_functions(2 * J - 1, np.sqrt(2.0) * t)[0::2]
    err = float(np.max(np.abs(recon - hermite_functions(J, t) ** 2)))
    return mu, err


def alpha_coefficient(family: PotentialFamily, p: int, basis: SpectralBasis) -> tuple[float, float]:
    """
    Coefficient of alpha_{n+p} in alpha -> int (f_1 + g) h_{n+p}^2: direct quadrature
    e^{-(n+p)} int h_{2(n+p)-1}(sqrt2 x) h_{n+p}^2 and the mu-form e^{-(n+p)} mu_{n+p,n+p} / sqrt2.
    """
    j = family.n + p
    if j > basis.J:
        raise ValueError(f"alpha_coefficient needs n+p <= J (got {j})")
    x, w = quadrature_rule(basis, 2.0)
    direct = np.exp(-j) * float(
        np.sum(w * hermite_functions(2 * j - 1, np.sqrt(2.0) * x)[2 * j - 2] * hermite_functions(j, x)[j - 1] ** 2)
    )
    mu, _ = mu_expansion(basis, j)
    return direct, float(np.exp(-j) * mu[j - 1, j - 1] / np.sqrt(2.0))


def _dist_to_int(v: np.ndarray) -> np.ndarray:
    return np.abs(v - np.rint(v))


def nondegeneracy_scan(
    family: PotentialFamily,
    nu: float,
    basis: SpectralBasis,
    *,
    K: int,
    J: int,
    alpha: float,
    tau: float,
    samples: int,
    seed: int,
    backend: str = "reference",
    threads: int = 0,
    show_progress: bool = False,
) -> tuple[pd.DataFrame, pd.DataFrame, dict]:
    """
    (a) distance to Z of int (f_1 + g) h_{n+p}^2 and of int (f_1 + g)(h_{n+p}^2 +- h_{n+q}^2), p != q;
    (b) per sampled xi, the certified margin of (lambda, Lambda) and whether it is excluded at alpha.
    """
    if nu > 0.05:
        log.warning(f"[nondeg] nu={nu} is outside the perturbative regime (<= 0.05)")
    n = family.n
    if n + J > basis.J:
        raise ValueError(f"nondegeneracy scan needs n+J <= basis.J ({n + J} > {basis.J})")
    d = np.diag(_bilinear(basis, lambda x: family.component(1, x)))[n : n + J]
    rows = [{"p": p, "q": 0, "sign": "", "value": d[p - 1]} for p in range(1, J + 1)]
    for p in range(1, J + 1):
        for q in range(1, p):
            rows.append({"p": p, "q": q, "sign": "+", "value": d[p - 1] + d[q - 1]})
            rows.append({"p": p, "q": q, "sign": "-", "value": d[p - 1] - d[q - 1]})
    integrality = pd.DataFrame.from_records(rows)
    integrality["dist_to_int"] = _dist_to_int(integrality["value"].to_numpy())

    rngs = RngBundle(seed)

    def one(i: int) -> dict:
        xi = rngs.for_sample(i).uniform(-1.0, 1.0, n)
        sp = perturbed_spectrum(family, nu, xi, basis)
        freqs = FrequencySet(sp.lam[:n], sp.lam[n : n + J], 2.0, 0.0)
        rep = certify(freqs, alpha, tau, K, J)
        return {
            "sample": i, **{f"xi{k + 1}": float(xi[k]) for k in range(n)},
            "margin": rep.margin, "worst_value": rep.worst_value, "excluded": not rep.passed,
        }

    out = get_backend(backend)(one, int(samples), threads=threads, show_progress=show_progress, desc="nondeg")
    scan = pd.DataFrame.from_records(out)
    summary = {
        "min_dist_to_int": float(integrality["dist_to_int"].min()),
        "min_worst_value": float(scan["worst_value"].min()) if len(scan) else float("nan"),
        "excluded_fraction": float(scan["excluded"].mean()) if len(scan) else 0.0,
        "alpha": float(alpha),
    }
    return integrality, scan, summary


# ---- the perturbation P ----


def _ymonomials(n: int, dmax: int) -> list[tuple[int, ...]]:
    return [a for a in product(range(dmax + 1), repeat=n) if sum(a) <= dmax]


def _series_mul(A: dict, B: dict, dmax: int) -> dict:
    out: dict = {}
    for a, va in A.items():
        for b, vb in B.items():
            c = tuple(i + j for i, j in zip(a, b))
            if sum(c) > dmax:
                continue
            out[c] = out[c] + va * vb if c in out else va * vb
    return out


def _series_pow(S: dict, e: int, dmax: int, shape: tuple) -> dict:
    out = {tuple([0] * len(next(iter(S)))): np.ones(shape, dtype=complex)}
    for _ in range(e):
        out = _series_mul(out, S, dmax)
    return out


def build_P(
    family: PotentialFamily,
    actions: Sequence[float],
    xi: Sequence[float],
    nu: float,
    eps: float,
    m: int,
    basis: SpectralBasis,
    *,
    D: int = 2,
    K: int | None = None,
    z_cap: int = 2,
    spectrum: PerturbedSpectrum | None = None,
    prune: float = 1e-15,
) -> TaylorHamiltonian:
    """
    Fourier-Taylor coefficients of eps int |u|^{2(m+1)} about y = 0, z = 0 up to
    weighted degree D and total z-degree z_cap (<= 2).

    With U = sum_j (y_j + I_j)^{1/2} e^{i theta_j} phi_j as a series in y and
    Z = sum_j z_j phi_{j+n}, the coefficient of Z^r Zbar^s is
    C(m+1, r) C(m+1, s) U^{m+1-r} Ubar^{m+1-s}; angles are handled on a grid that
    resolves every harmonic |k_i| <= m+1 before truncating to K.
    """
    n = family.n
    I = np.asarray(actions, dtype=float).ravel()
    if I.size != n or np.any(I <= 0):
        raise ValueError(f"nls.actions must be {n} positive numbers")
    if D < 2:
        raise ValueError("nls.D must be >= 2")
    if m < 1:
        raise ValueError("nls.m must be >= 1")
    if not 0 <= z_cap <= 2:
        raise ValueError("nls.z_cap must be in 0..2")
    Jn = basis.J - n
    K = m + 1 if K is None else int(K)
    if eps == 0:
        return TaylorHamiltonian.zero(n, Jn, K=K, D=D)

    sp = spectrum or perturbed_spectrum(family, nu, xi, basis)
    scale = float(m + 2)
    if (2 * m + 4) * (basis.J - 1) > 2 * basis.Q - 1:
        log.warning(
            f"[quad] |u|^{2 * (m + 1)} against two modes exceeds the exact degree of Q={basis.Q}"
        )
    x, w = quadrature_rule(basis, scale)
    phix = sp.phi.T @ hermite_functions(basis.J, x)  # (J, X) eigenfunction samples
    inner, outer = phix[:n], phix[n:]

    K_grid = max(K, m + 1)
    grid = ThetaGrid.for_cutoff(n, K_grid)
    eth = np.exp(1j * grid.points)  # (P, n)
    shape = (grid.size, x.size)

    dmax = D // 2
    U: dict = {}
    for a in _ymonomials(n, dmax):
        if sum(a) == 0:
            U[a] = (eth * np.sqrt(I)[None, :]) @ inner
        elif np.count_nonzero(a) == 1:
            jj = int(np.flatnonzero(a)[0])
            d = a[jj]
            c = float(binom(0.5, d)) * I[jj] ** (0.5 - d)
            U[a] = c * np.outer(eth[:, jj], inner[jj])
    Ubar = {a: np.conj(v) for a, v in U.items()}

    kv_full = kvectors(n, K_grid)
    keep = np.max(np.abs(kv_full), axis=1) <= K
    rows, cs = [], []
    dropped = 0.0
    wx = w[None, :]
    for r, s in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
        if r + s > z_cap or r + s > D:
            continue
        dm = (D - r - s) // 2
        S = _series_mul(
            _series_pow(U, m + 1 - r, dm, shape), _series_pow(Ubar, m + 1 - s, dm, shape), dm
        )
        mult = eps * float(comb(m + 1, r)) * float(comb(m + 1, s))
        for a, val in S.items():
            vw = val * wx
            if r + s == 0:
                g = vw.sum(axis=1)
            elif r + s == 1:
                g = vw @ outer.T
            else:
                g = np.einsum("px,jx,lx->pjl", vw, outer, outer, optimize=True)
            c = grid.to_coefficients(g, K_grid) * mult
            dropped += float(np.sum(np.abs(c[~keep])))
            c = c[keep]
            kv = kv_full[keep]
            _emit(rows, cs, n, Jn, kv, a, r, s, c)

    if not rows:
        return TaylorHamiltonian.zero(n, Jn, K=K, D=D)
    exps = np.vstack(rows)
    coeffs = np.concatenate(cs)
    big = np.abs(coeffs) > prune * max(float(np.max(np.abs(coeffs))), np.finfo(float).tiny)
    P = TaylorHamiltonian.from_arrays(n, Jn, exps[big], coeffs[big], K=K, D=D, discarded=dropped)
    defect = P.reality_defect()
    if defect > 1e-10 * max(P.mass(), np.finfo(float).tiny):
        log.warning(f"[reality] build_P coefficient symmetry defect {defect:.2e}")
    return P


def _emit(rows: list, cs: list, n: int, Jn: int, kv: np.ndarray, a: tuple, r: int, s: int, c: np.ndarray) -> None:
    width = 2 * n + 2 * Jn
    base = np.zeros((kv.shape[0], width), dtype=np.int64)
    base[:, :n] = kv
    base[:, n : 2 * n] = np.asarray(a, dtype=np.int64)
    off_z, off_zb = 2 * n, 2 * n + Jn
    if r + s == 0:
        rows.append(base)
        cs.append(c)
        return
    if r + s == 1:
        off = off_z if r == 1 else off_zb
        e = np.repeat(base, Jn, axis=0)
        jj = np.tile(np.arange(Jn), kv.shape[0])
        e[np.arange(e.shape[0]), off + jj] += 1
        rows.append(e)
        cs.append(c.reshape(-1))
        return
    ki, j, l = np.meshgrid(np.arange(kv.shape[0]), np.arange(Jn), np.arange(Jn), indexing="ij")
    ki, j, l = ki.ravel(), j.ravel(), l.ravel()
    vals = c.reshape(-1)
    if r == 1:
        oj, ol = off_z, off_zb
    else:
        sel = j <= l
        ki, j, l, vals = ki[sel], j[sel], l[sel], vals[sel] * np.where(j[sel] < l[sel], 2.0, 1.0)
        oj = ol = off_z if r == 2 else off_zb
    e = base[ki].copy()
    np.add.at(e, (np.arange(e.shape[0]), oj + j), 1)
    np.add.at(e, (np.arange(e.shape[0]), ol + l), 1)
    rows.append(e)
    cs.append(vals)


def neighbour_grid(xi: Sequence[float], h: float = 0.01) -> np.ndarray:
    """xi and one point moved by h towards the centre of Pi in every coordinate."""
    xi = np.asarray(xi, dtype=float)
    return np.stack([xi, np.where(xi >= 0, xi - h, xi + h)])


def perturbation_lipschitz(
    family: PotentialFamily,
    actions: Sequence[float],
    xi_grid: np.ndarray,
    nu: float,
    eps: float,
    m: int,
    basis: SpectralBasis,
    norm: NormParams,
    *,
    D: int = 2,
    K: int | None = None,
) -> float:
    """
    Lipschitz semi-norm of xi -> P(xi) over the grid rows. Diagnostic only:
    the KAM run never gates on it.
    """
    xi_grid = np.atleast_2d(np.asarray(xi_grid, dtype=float))
    if xi_grid.shape[0] < 2:
        raise ValueError("the xi grid needs at least 2 points")
    Ps = [build_P(family, actions, xi, nu, eps, m, basis, D=D, K=K) for xi in xi_grid]
    return lipschitz_seminorm(Ps, xi_grid, norm)


def second_derivative_decay(P: TaylorHamiltonian, j_min: int = 2) -> tuple[pd.DataFrame, float]:
    """
    A_jl = sum_k |coeff of z_j zbar_l| and the log-log slope of A_jl against j*l
    (diagonal j = l entries, j >= j_min).
    """
    J = P.J
    A = np.zeros((J, J))
    sel = (P.q.sum(axis=1) == 1) & (P.qb.sum(axis=1) == 1) & (P.m.sum(axis=1) == 0)
    for i in np.flatnonzero(sel):
        j = int(np.flatnonzero(P.q[i])[0])
        l = int(np.flatnonzero(P.qb[i])[0])
        A[j, l] += abs(P.coeffs[i])
    j = np.arange(1, J + 1)
    diag = np.diag(A)
    ok = (j >= j_min) & (diag > 0)
    slope = float(linregress(np.log(j[ok] ** 2.0), np.log(diag[ok])).slope) if ok.sum() >= 2 else float("nan")
    return pd.DataFrame({"j": j, "A_jj": diag}), slope


# ---- the KAM run ----


@dataclass(frozen=True, eq=False)
class NlsRunResult:
    spectrum: PerturbedSpectrum
    freqs0: FrequencySet
    P0: TaylorHamiltonian
    run: KamRunResult
    reduction: float
    drift: float
    drift_constant: float
    first_contraction: float = 0.0
    tail_majorant: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def trace(self) -> pd.DataFrame:
        return self.run.trace


def _resonant_majorant(P: TaylorHamiltonian, norm: NormParams) -> float:
    R, _ = taylor_truncate(P)
    return majorant_norm(resonant_part(R), norm).total


def nls_kam_run(
    family: PotentialFamily,
    actions: Sequence[float],
    xi: Sequence[float],
    nu: float,
    eps: float,
    m: int,
    basis: SpectralBasis,
    sched: KamSchedule,
    *,
    norm: NormParams | None = None,
    C0: float = 10.0,
    D: int = 2,
    K: int | None = None,
    steps: int = 4,
    target: float = 1e-14,
) -> NlsRunResult:
    """
    A few Newton steps on N(lambda, Lambda) + P. P is degree-truncated, so the run is
    reported through its per-step majorants, the resonant reduction of the first
    step and the internal frequency drift, not as a converged torus.
    """
    norm = norm or NormParams()
    n = family.n
    if eps > 0 and nu < C0 * eps:
        raise ValueError(f"nls.nu must be >= C0 * nls.epsilon ({nu} < {C0 * eps})")
    if not norm.r < float(np.min(actions)):
        raise ValueError("norm.r must be < min(nls.actions)")

    with Timer("nls run", logger=log):
        sp = perturbed_spectrum(family, nu, xi, basis)
        freqs = sp.split(n)
        rep = certify(freqs, float(sched.alpha[0]), sched.tau, int(sched.K[0]), freqs.J)
        if not rep.passed:
            idx = rep.worst_index
            raise ResonanceExcluded(
                f"xi={list(np.ravel(xi))} fails non-resonance at alpha={sched.alpha[0]:.3e}: "
                f"worst {idx} value {rep.worst_value:.3e}",
                k=idx.k if idx else None, l=idx.l if idx else None,
            )
        P0 = build_P(family, actions, xi, nu, eps, m, basis, D=D, K=K, spectrum=sp)
        if P0.nnz == 0:
            res = run(freqs, P0, sched, norm=norm, target=target, max_nu=0)
            return NlsRunResult(sp, freqs, P0, res, 0.0, 0.0, 0.0)

        before = _resonant_majorant(P0, norm)
        first = kam_step(freqs, P0, sched, 0, norm=norm)
        after = _resonant_majorant(first.P, norm)
        reduction = after / before if before > 0 else 0.0
        res = run(freqs, P0, sched, norm=norm, target=target, max_nu=steps - 1)

    omega0 = 2.0 * np.arange(1, n + 1) - 1.0
    drift = float(np.max(np.abs(res.freqs.omega - omega0)))
    tr = res.trace
    contraction = float(tr["eps_next"].iloc[0] / tr["eps_majorant"].iloc[0]) if len(tr) else 0.0
    _, tail = taylor_truncate(res.P)
    tail_majorant = majorant_norm(tail, norm).smallness if tail.nnz else 0.0
    notes = []
    if len(tr) >= 2 and tr["eps_next"].iloc[-1] > 0.5 * tr["eps_majorant"].iloc[-1]:
        # the quadratic step never removes weighted degree > 2
        notes.append(
            f"majorant plateaus at {tr['eps_next'].iloc[-1]:.3e}; degree > 2 tail {tail_majorant:.3e}"
        )
    log.info(
        f"[done] nls D={D} steps={len(tr)} first contraction={contraction:.3e} "
        f"resonant reduction={reduction:.3e} drift={drift:.3e} (C={drift / nu if nu else 0.0:.3g})"
    )
    return NlsRunResult(
        sp, freqs, P0, res, reduction, drift, drift / nu if nu > 0 else 0.0,
        contraction, tail_majorant, notes,
    )
