"""
Reducibility of  i u_t = -u_xx + x^2 u + eps V(omega t, x) u.

In Hermite coordinates u = sum z_j h_j the equation is Hamiltonian with

    H = omega.y + sum_j (2j-1) z_j zbar_j + eps Q(theta, z, zbar),
    Q = sum_{j,l} Q_jl(theta) z_j zbar_l,   Q_jl(theta) = int V(theta, x) h_j h_l dx,

and z_j' = -i dH/dzbar_j, i.e. z' = -i (D + eps Q(omega t)) z with D = diag(2j-1).

The engine brackets with the opposite orientation (z' = +i dH/dzbar). Q(theta)
is real symmetric, so the engine-frame state is the complex conjugate of the
physical one: w = zbar. The engine conjugates H to omega.y + sum Omega*_j w_j wbar_j
by a map W -> L(theta) W with frozen angles, giving
W(t) = L(omega t) (w'(0) e^{i Omega* t}, wbar'(0) e^{-i Omega* t}),
and the physical z(t) is the wbar block of W(t).
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, Sequence
import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .divisors import FrequencySet, certify_via_diophantine
from .engine import KamRunResult, run
from .errors import (
    ConvergenceError,
    DivergenceError,
    IntegrityError,
    ResonanceExcluded,
    ResonantDivisor,
)
from .fourier import ThetaGrid, evaluate_series, hermitize, kvectors
from .hamiltonian import NormParams, TaylorHamiltonian
from .hermite import SpectralBasis, build_basis
from .schedule import KamSchedule
from .utils.logging import get_logger
from .utils.profiling import Timer

log = get_logger("hokam.reducibility")

_ALIAS_TOL = 1e-10
_COND_MAX = 1e10
_TRANSLATION_TOL = 1e-12


@dataclass(frozen=True)
class QuasiPeriodicPotential:
    """
    V(theta, x), real and 2 pi-periodic in each angle. `fn` maps angles (P, n)
    and abscissae (Q,) to a (P, Q) array.
    """

    n: int
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"
    s: float = 1.0  # analyticity width hint
    decay_C: float | None = None
    decay_delta: float | None = None
    x_independent: bool = False

    def __call__(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.asarray(self.fn(theta, x), dtype=float)
        return np.broadcast_to(v, (theta.shape[0], x.size))

    def periodicity_defect(self, grid: ThetaGrid, x: np.ndarray) -> float:
        th = grid.points
        base = self(th, x)
        worst = 0.0
        for i in range(self.n):
            shifted = th.copy()
            shifted[:, i] += 2.0 * np.pi
            worst = max(worst, float(np.max(np.abs(self(shifted, x) - base))))
        return worst


# ---- building Q ----


def bilinear_family(V: QuasiPeriodicPotential, basis: SpectralBasis, theta: np.ndarray) -> np.ndarray:
    """(P, J, J) matrices int V(theta_p, x) h_j h_l dx."""
    v = V(theta, basis.nodes)
    if not np.all(np.isfinite(v)):
        p, q = np.argwhere(~np.isfinite(v))[0]
        raise ValueError(f"non-finite potential sample at angle index {p}, node index {q}")
    H = basis.values
    M = np.einsum("jq,pq,lq->pjl", H, v * basis.weights[None, :], H, optimize=True)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def matrix_coefficients(
    V: QuasiPeriodicPotential, basis: SpectralBasis, K: int, grid: ThetaGrid
) -> np.ndarray:
    """Fourier coefficients Q_k (|k|_inf <= K) of the matrix family, Hermitian across +-k."""
    if grid.G < 2 * K + 2:
        raise ValueError(f"grid too coarse: G={grid.G} < 2K+2 = {2 * K + 2}")
    samples = bilinear_family(V, basis, grid.points)
    c = grid.to_coefficients(samples, K)
    kv = kvectors(V.n, K)
    if K > 0:
        shell = np.max(np.abs(kv), axis=1) == K
        total = float(np.sum(np.abs(c)))
        frac = float(np.sum(np.abs(c[shell]))) / total if total > 0 else 0.0
        if frac > _ALIAS_TOL:
            log.warning(f"[alias] |k|={K} shell carries {frac:.2e} of the potential's Fourier mass")
    return hermitize(c, kv)


def build_Q(
    V: QuasiPeriodicPotential,
    basis: SpectralBasis,
    K: int,
    grid: ThetaGrid | None = None,
    *,
    prune: float = 1e-14,
) -> TaylorHamiltonian:
    """Q as a TaylorHamiltonian with keys e^{ik.theta} z_j zbar_l."""
    grid = ThetaGrid.for_cutoff(V.n, K) if grid is None else grid
    c = matrix_coefficients(V, basis, K, grid)
    n, J = V.n, basis.J
    scale = float(np.max(np.abs(c), initial=0.0))
    ki, j, l = np.nonzero(np.abs(c) > prune * scale) if scale > 0 else (np.array([], int),) * 3
    exps = np.zeros((ki.size, 2 * n + 2 * J), dtype=np.int64)
    exps[:, :n] = kvectors(n, K)[ki]
    exps[np.arange(ki.size), 2 * n + j] += 1
    exps[np.arange(ki.size), 2 * n + J + l] += 1
    return TaylorHamiltonian.from_arrays(n, J, exps, c[ki, j, l], K=K, D=2)


# ---- reduction ----


@dataclass(frozen=True, eq=False)
class ReducibilityResult:
    omega: np.ndarray
    Omega_star: np.ndarray
    eps: float
    run: KamRunResult
    basis: SpectralBasis
    Q: TaylorHamiltonian
    notes: list[str] = field(default_factory=list)

    @property
    def map(self):
        return self.run.map

    @property
    def trace(self) -> pd.DataFrame:
        return self.run.trace

    def omega_star_frame(self) -> pd.DataFrame:
        j = np.arange(1, self.Omega_star.size + 1)
        return pd.DataFrame(
            {"j": j, "Omega_star": self.Omega_star, "shift": self.Omega_star - (2.0 * j - 1.0)}
        )

    def floquet(self, K: int) -> pd.DataFrame:
        """Floquet exponents Omega*_j + k.omega for |k|_inf <= K."""
        kv = kvectors(self.omega.size, K)
        kw = kv @ self.omega
        rows = []
        for j, W in enumerate(self.Omega_star, start=1):
            for k, w in zip(kv, kw):
                rows.append({"j": j, **{f"k{i + 1}": int(k[i]) for i in range(k.size)}, "value": W + w})
        return pd.DataFrame.from_records(rows)


def oscillator_frequencies(omega: Sequence[float], J: int) -> FrequencySet:
    return FrequencySet(np.asarray(omega, dtype=float), 2.0 * np.arange(1, J + 1) - 1.0, 2.0, 0.0)


def check_quadratic_class(res: KamRunResult) -> None:
    """Angles frozen, no Z-translation, perturbation still sum Q_jl(theta) z_j zbar_l."""
    P = res.P
    if P.nnz and (np.any(P.m) or np.any(P.z_degree < 2) or np.any(P.q.sum(axis=1) != 1)):
        raise IntegrityError("reduced perturbation left the z-zbar quadratic class")
    phi = res.map
    if phi is None:
        raise IntegrityError("reduction produced no composed map with frozen angles")
    if not phi.theta_fixed:
        raise IntegrityError("composed map moves the angles")
    shift = float(np.max(np.abs(phi.translation), initial=0.0))
    if shift > _TRANSLATION_TOL:
        raise IntegrityError(f"composed map carries a Z-translation of size {shift:.3e}")


def reduce(
    V: QuasiPeriodicPotential,
    omega: Sequence[float],
    eps: float,
    sched: KamSchedule,
    *,
    J: int,
    Q_nodes: int | None = None,
    norm: NormParams | None = None,
    target: float = 1e-12,
    max_nu: int | None = None,
    strict: bool = False,
    K_potential: int | None = None,
) -> ReducibilityResult:
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size != V.n:
        raise ValueError(f"reduce.omega has {omega.size} entries, potential needs n={V.n}")
    norm = norm or NormParams()
    basis = build_basis(J, Q_nodes)
    freqs = oscillator_frequencies(omega, J)
    K = int(sched.K[0]) if K_potential is None else int(K_potential)

    rep = certify_via_diophantine(freqs, float(sched.alpha[0]), sched.tau, K, J)
    if not rep.passed:
        idx = rep.worst_index
        raise ResonanceExcluded(
            f"omega={omega.tolist()} fails non-resonance at alpha={sched.alpha[0]:.3e}: "
            f"worst {idx} (b={rep.b}) value {rep.worst_value:.3e}",
            k=idx.k if idx else None, l=idx.l if idx else None, b=rep.b,
        )

    with Timer("reduce", logger=log):
        Q = build_Q(V, basis, K)
        P0 = Q.scale(eps)
        res = run(freqs, P0, sched, norm=norm, target=target, max_nu=max_nu, strict=strict)

    check_quadratic_class(res)
    notes = []
    if res.final_report is not None and not res.final_report.passed:
        notes.append("final frequencies fail the halved non-resonance margin")
    Omega_star = res.freqs.Omega.copy()
    log.info(
        f"[done] reduce eps={eps:.3e} steps={len(res.trace)} "
        f"max|Omega*-Omega|={np.max(np.abs(Omega_star - freqs.Omega)):.3e}"
    )
    return ReducibilityResult(omega, Omega_star, float(eps), res, basis, Q, notes)


# ---- closed-form check for angle-only potentials ----


def oracle_x_independent(
    a: np.ndarray,
    K: int,
    omega: Sequence[float],
    eps: float,
    grid: ThetaGrid,
    *,
    alpha: float = 0.0,
    tau: float = 3.0,
) -> np.ndarray:
    """
    W(theta) = exp(eps sum_k a_k/(k.omega) (e^{ik.theta} - 1)) on the grid for
    V(theta) = sum_k a_k e^{ik.theta} with a_0 = 0; a is indexed like kvectors(n, K).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    kv = kvectors(omega.size, K)
    a = np.asarray(a, dtype=complex)
    zero = ~np.any(kv != 0, axis=1)
    if np.any(np.abs(a[zero]) > 1e-14):
        raise ValueError("potential must have zero angle mean")
    kw = kv @ omega
    act = (~zero) & (a != 0)
    thr = alpha / (1.0 + np.abs(kv).sum(axis=1) ** tau)
    bad = act & ((np.abs(kw) < thr) | (kw == 0))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ResonantDivisor(tuple(kv[i]), float(abs(kw[i])), float(thr[i]))
    c = np.zeros_like(a)
    c[act] = a[act] / kw[act]
    phase = np.exp(1j * grid.points @ kv.T) - 1.0
    return np.exp(eps * (phase @ c))


# ---- time integration ----


def integrate_schrodinger(
    V: QuasiPeriodicPotential,
    omega: Sequence[float],
    eps: float,
    z0: np.ndarray,
    T: float,
    *,
    tol: float = 1e-10,
    t_eval: np.ndarray | None = None,
    K: int = 8,
    basis: SpectralBasis | None = None,
) -> tuple[np.ndarray, np.ndarray, pd.DataFrame]:
    """
    z' = -i (D + eps Q(omega t)) z with D = diag(2j-1) and J = len(z0); Q(theta)
    is rebuilt from V through its Fourier coefficients up to |k|_inf <= K.
    Returns (t, z(t), norms) with norms the l2_p sizes for p = 0 and 2.
    """
    if tol > 1e-9:
        raise ValueError("reduce.integrate_tol must be <= 1e-9")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size != V.n:
        raise ValueError(f"omega has {omega.size} entries, potential needs n={V.n}")
    z0 = np.asarray(z0, dtype=complex)
    J = z0.size
    basis = build_basis(J) if basis is None else basis
    if basis.J != J:
        raise ValueError(f"basis has J={basis.J}, initial state has {J} modes")
    kv = kvectors(V.n, K)
    kw = kv @ omega
    D = 2.0 * np.arange(1, J + 1) - 1.0
    if eps != 0.0:
        flat = matrix_coefficients(V, basis, K, ThetaGrid.for_cutoff(V.n, K)).reshape(kv.shape[0], J * J)
    else:
        flat = np.zeros((kv.shape[0], J * J), dtype=complex)

    def rhs(t, z):
        Qt = (np.exp(1j * kw * t) @ flat).reshape(J, J)
        return -1j * (D * z + eps * (Qt @ z))

    t_eval = np.linspace(0.0, T, 201) if t_eval is None else np.asarray(t_eval, dtype=float)
    sol = solve_ivp(
        rhs, (0.0, float(T)), z0, method="DOP853",
        rtol=tol, atol=tol * 1e-3, t_eval=t_eval,
    )
    if not sol.success:
        raise ConvergenceError(f"Schrodinger integration failed: {sol.message}")
    z = sol.y.T
    j = np.arange(1, J + 1, dtype=float)
    norms = pd.DataFrame(
        {
            "t": sol.t,
            "norm_p0": np.sqrt(np.sum(np.abs(z) ** 2, axis=1)),
            "norm_p2": np.sqrt(np.sum(j**2 * np.abs(z) ** 2, axis=1)),
        }
    )
    return sol.t, z, norms


def norm_growth_constant(norms: pd.DataFrame, eps: float) -> dict[str, float]:
    """C with (1 - C eps) |z0|_p <= |z(t)|_p <= (1 + C eps) |z0|_p over the record."""
    out = {}
    for col in ("norm_p0", "norm_p2"):
        r = norms[col].to_numpy() / norms[col].iloc[0]
        out[col] = float(np.max(np.abs(r - 1.0)) / eps) if eps > 0 else 0.0
    return out


def _interpolant(result: ReducibilityResult):
    phi = result.map
    if phi is None:
        raise ValueError("no composed map available")
    Kc = phi.grid.max_cutoff
    return kvectors(phi.n, Kc), phi.grid.to_coefficients(phi.L, Kc), phi.grid.to_coefficients(phi.translation, Kc)


def kam_predicted_solution(result: ReducibilityResult, z0: np.ndarray, t: np.ndarray | float) -> np.ndarray:
    """Physical z(t) reconstructed from the reduced flow; shape (len(t), J)."""
    phi = result.map
    J = phi.J
    t = np.atleast_1d(np.asarray(t, dtype=float))
    L0, c0 = phi.L[0], phi.translation[0]
    cond = float(np.linalg.cond(L0))
    if cond > _COND_MAX:
        raise IntegrityError(f"L(0) is ill-conditioned (cond={cond:.2e})")
    z0 = np.asarray(z0, dtype=complex)
    # engine-frame state (w, wbar) = (zbar, z)
    Zp0 = np.linalg.solve(L0, np.concatenate([np.conj(z0), z0]) - c0)
    kv, Lc, cc = _interpolant(result)
    theta = t[:, None] * result.omega[None, :]
    Lt = evaluate_series(kv, Lc, theta)
    ct = evaluate_series(kv, cc, theta)
    W = result.Omega_star
    rot = np.exp(1j * np.concatenate([W, -W])[None, :] * t[:, None])
    Z = np.einsum("tab,tb->ta", Lt, rot * Zp0[None, :]) + ct
    return Z[:, J:]


def floquet_residual(
    result: ReducibilityResult, V: QuasiPeriodicPotential, modes: Sequence[int] | None = None
) -> float:
    """
    max_j max_theta |omega.d_theta psi_j - i Omega*_j psi_j + i (D + eps Q(theta)) psi_j| / |psi_j|
    where z(t) = psi_j(omega t) e^{-i Omega*_j t} is the Floquet solution and
    psi_j is the conjugated w-part of column j of L(theta).
    """
    phi = result.map
    grid, J = phi.grid, phi.J
    Qg = bilinear_family(V, result.basis, grid.points)
    D = 2.0 * np.arange(1, J + 1) - 1.0
    modes = range(1, J + 1) if modes is None else modes
    worst = 0.0
    for j in modes:
        col = np.conj(phi.L[:, :J, j - 1])
        dcol = sum(
            result.omega[i] * grid.spectral_derivative(col, i) for i in range(phi.n)
        )
        res = dcol - 1j * result.Omega_star[j - 1] * col + 1j * (
            D[None, :] * col + result.eps * np.einsum("pab,pb->pa", Qg, col)
        )
        scale = np.maximum(np.linalg.norm(col, axis=1), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.linalg.norm(res, axis=1) / scale)))
    return worst


# ---- scans ----


def truncation_stability(
    V: QuasiPeriodicPotential, omega: Sequence[float], eps: float, sched: KamSchedule, J: int, **kw
) -> pd.DataFrame:
    """Omega*_j at J and 2J for j <= J/2."""
    a = reduce(V, omega, eps, sched, J=J, **kw)
    b = reduce(V, omega, eps, sched, J=2 * J, **kw)
    m = J // 2
    j = np.arange(1, m + 1)
    return pd.DataFrame(
        {
            "j": j,
            "Omega_star_J": a.Omega_star[:m],
            "Omega_star_2J": b.Omega_star[:m],
            "difference": np.abs(a.Omega_star[:m] - b.Omega_star[:m]),
        }
    )


def epsilon_boundary(
    V: QuasiPeriodicPotential,
    omega: Sequence[float],
    eps_values: Sequence[float],
    sched: KamSchedule,
    *,
    J: int,
    target: float = 1e-12,
    **kw,
) -> tuple[pd.DataFrame, float]:
    """
    Run the reduction over increasing eps. Returns the table and the largest eps
    below which every run reached the target.
    """
    rows = []
    for e in sorted(float(x) for x in eps_values):
        row = {"eps": e, "converged": False, "steps": 0, "eps_final": np.nan, "reason": ""}
        try:
            r = reduce(V, omega, e, sched, J=J, target=target, **kw)
            row["steps"] = len(r.trace)
            row["eps_final"] = r.run.eps_final
            row["converged"] = bool(len(r.trace) == 0 or r.run.eps_final <= target)
            if not row["converged"]:
                row["reason"] = "target not reached"
        except (DivergenceError, ResonanceExcluded) as e_:
            row["reason"] = type(e_).__name__
        rows.append(row)
    df = pd.DataFrame.from_records(rows)
    boundary = 0.0
    for _, r in df.iterrows():
        if not r["converged"]:
            break
        boundary = float(r["eps"])
    return df, boundary
