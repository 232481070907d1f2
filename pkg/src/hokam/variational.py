"""
Periodic solutions u = e^{-i lam t} phi of  i u_t = -u_xx + x^2 u + |u|^{p-1} u
from successive minimizers of

    J(phi) = 1/2 int (phi')^2 + x^2 phi^2 + 1/(p+1) int |phi|^{p+1}

on {|phi|_L2 = mu} intersected with the orthogonal complement of the earlier
minimizers. phi is real and held by its Hermite coefficients c, so the
quadratic part is 1/2 sum (2j-1) c_j^2 exactly.

With the focusing flag the nonlinear term enters as -eps/(p+1) int |phi|^{p+1}.
"""

from __future__ import annotations
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .backends import get_backend
from .errors import ConvergenceError, DivergenceError, OrthogonalityError
from .hermite import SpectralBasis, build_basis, hermite_functions, quadrature_rule
from .rng import RngBundle
from .types import VariationalRow
from .utils.logging import get_logger, log_json
from .utils.profiling import Timer

log = get_logger("hokam.variational")

_ARMIJO = 1e-4
_MIN_STEP = 1e-18


@dataclass(frozen=True)
class VariationalProblem:
    mu: float
    p: float
    J: int
    count: int = 1
    tol: float = 1e-6
    max_iter: int = 20000
    restarts: int = 1
    focusing: bool = False
    focusing_eps: float = 0.0
    Q: int | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("variational.mu must be > 0")
        if self.p < 1:
            raise ValueError("variational.p must be >= 1")
        if self.count < 1 or self.count > self.J:
            raise ValueError("variational.count must be in 1..J")
        if self.restarts < 1:
            raise ValueError("variational.restarts must be >= 1")
        if self.focusing and not self.p < 5:
            raise ValueError("variational.p must be < 5 in the focusing case")

    @property
    def sign(self) -> float:
        return -self.focusing_eps if self.focusing else 1.0


class Functional:
    """J, its gradient in coefficient space and the nonlinear term, on a fixed basis."""

    def __init__(self, prob: VariationalProblem, basis: SpectralBasis | None = None):
        self.prob = prob
        self.basis = basis or build_basis(prob.J, prob.Q)
        p = prob.p
        if not (float(p + 1).is_integer() and int(p + 1) % 2 == 0):
            log.warning(f"[quad] |phi|^{p + 1} is not polynomial; quadrature is not exact")
        # |phi|^{p+1} decays like exp(-(p+1) x^2 / 2)
        self.x, self.w = quadrature_rule(self.basis, (p + 1) / 2.0)
        self.H = hermite_functions(prob.J, self.x)
        self.T = self.basis.eigenvalues

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        """Hermite coefficients of |phi|^{p-1} phi (complex c allowed)."""
        u = c @ self.H
        return self.H @ (self.w * np.abs(u) ** (self.prob.p - 1) * u)

    def quadratic(self, c: np.ndarray) -> float:
        return 0.5 * float(np.sum(self.T * c * c))

    def potential(self, c: np.ndarray) -> float:
        u = c @ self.H
        return float(np.sum(self.w * np.abs(u) ** (self.prob.p + 1))) / (self.prob.p + 1)

    def energy(self, c: np.ndarray) -> float:
        return self.quadratic(c) + self.prob.sign * self.potential(c)

    def gradient(self, c: np.ndarray) -> np.ndarray:
        return self.T * c + self.prob.sign * self.nonlinear(c)

    def multiplier(self, c: np.ndarray) -> float:
        """lam = (<T phi, phi> + sign int |phi|^{p+1}) / mu^2."""
        return float(self.gradient(c) @ c) / self.prob.mu**2


def residual(
    phi: np.ndarray, lam: float, p: float, basis: SpectralBasis, *, sign: float = 1.0
) -> float:
    """|T phi - lam phi + sign |phi|^{p-1} phi|_l2 in Hermite coefficients."""
    prob = VariationalProblem(mu=max(float(np.linalg.norm(phi)), 1e-300), p=p, J=basis.J, Q=basis.Q)
    f = Functional(prob, basis)
    c = np.asarray(phi, dtype=float)
    return float(np.linalg.norm(f.T * c - lam * c + sign * f.nonlinear(c)))


def _project(v: np.ndarray, prev: np.ndarray) -> np.ndarray:
    if prev.size == 0:
        return v
    return v - prev.T @ (prev @ v) / np.sum(prev * prev, axis=1)


def _tangent(g: np.ndarray, c: np.ndarray, prev: np.ndarray) -> np.ndarray:
    g = _project(g, prev)
    return g - (g @ c) / (c @ c) * c


def _retract(c: np.ndarray, prev: np.ndarray, mu: float) -> np.ndarray:
    c = _project(c, prev)
    return mu * c / np.linalg.norm(c)


@dataclass(frozen=True, eq=False)
class Descent:
    c: np.ndarray
    energy: float
    iterations: int
    converged: bool
    residual: float
    energy_trace: list[float] = field(default_factory=list)


def descend(
    f: Functional, c0: np.ndarray, prev: np.ndarray, *, tol: float | None = None, max_iter: int | None = None
) -> Descent:
    """
    Projected gradient on the constrained sphere with Barzilai-Borwein steps
    and Armijo backtracking; energy is non-increasing along the iterates.
    """
    prob = f.prob
    tol = prob.tol if tol is None else tol
    max_iter = prob.max_iter if max_iter is None else max_iter
    c = _retract(np.asarray(c0, dtype=float), prev, prob.mu)
    E = f.energy(c)
    quad0 = f.quadratic(c)
    g = _tangent(f.gradient(c), c, prev)
    t = 1.0 / float(np.max(f.T))
    trace = [E]
    c_old = g_old = None
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            return Descent(c, E, it - 1, True, gn, trace)
        if c_old is not None:
            s, yv = c - c_old, g - g_old
            sy = abs(float(s @ yv))
            if sy > 0:
                t = float(s @ s) / sy
        step = t
        while True:
            cn = _retract(c - step * g, prev, prob.mu)
            En = f.energy(cn)
            if En <= E - _ARMIJO * step * gn * gn:
                break
            step *= 0.5
            if step < _MIN_STEP:
                return Descent(c, E, it, gn <= tol, gn, trace)
        if En > E:
            raise ConvergenceError(f"energy increased along the descent ({E:.6e} -> {En:.6e})")
        if prob.focusing and f.quadratic(cn) < 0.5 * quad0 and En < trace[0] - abs(trace[0]):
            raise DivergenceError("focusing descent runs away (quadratic part collapsed)")
        c_old, g_old = c, g
        c, E = cn, En
        g = _tangent(f.gradient(c), c, prev)
        trace.append(E)
    gn = float(np.linalg.norm(g))
    return Descent(c, E, max_iter, gn <= tol, gn, trace)


@dataclass(frozen=True, eq=False)
class VariationalResult:
    phis: np.ndarray  # (count, J)
    lam: np.ndarray
    energy: np.ndarray
    residual: np.ndarray
    residual_unconstrained: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    restart: np.ndarray
    energy_traces: list[list[float]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows: list[VariationalRow] = [
            {
                "k": k + 1, "restart": int(self.restart[k]), "energy": float(self.energy[k]),
                "lam": float(self.lam[k]), "residual": float(self.residual[k]),
                "residual_unconstrained": float(self.residual_unconstrained[k]),
                "iterations": int(self.iterations[k]), "converged": bool(self.converged[k]),
            }
            for k in range(self.lam.size)
        ]
        return pd.DataFrame.from_records(rows)


def _initial(rng: np.random.Generator, J: int, k: int) -> np.ndarray:
    # random, but with most weight on the low modes
    c = rng.standard_normal(J) * np.exp(-np.arange(J) / max(2.0, k + 1.0))
    return c


def minimize(
    prob: VariationalProblem,
    seed: int | None,
    *,
    basis: SpectralBasis | None = None,
    backend: str = "reference",
    threads: int = 0,
    show_progress: bool = False,
    strict: bool = True,
) -> VariationalResult:
    """
    count successive orthogonal minimizers; each one keeps the best of
    `restarts` independent descents.
    """
    f = Functional(prob, basis)
    rngs = RngBundle(seed)
    J = prob.J
    prev = np.zeros((0, J))
    out = {key: [] for key in ("lam", "energy", "res", "resu", "it", "conv", "restart")}
    traces = []
    with Timer("variational", logger=log):
        for k in range(prob.count):

            def one(r: int, k=k, prev=prev) -> Descent:
                return descend(f, _initial(rngs.for_restart(k, r), J, k), prev)

            runs = get_backend(backend)(
                one, prob.restarts, threads=threads, show_progress=show_progress, desc=f"phi{k + 1}"
            )
            best = min(range(len(runs)), key=lambda r: runs[r].energy)
            d = runs[best]
            c = d.c * (1.0 if d.c[np.argmax(np.abs(d.c))] >= 0 else -1.0)
            if prev.size:
                ortho = float(np.max(np.abs(prev @ c))) / prob.mu**2
                if ortho > 1e-8:
                    raise OrthogonalityError(f"minimizer {k + 1} lost orthogonality ({ortho:.2e})")
            if not d.converged:
                msg = f"minimizer {k + 1} did not reach tol={prob.tol:.1e} (residual {d.residual:.2e})"
                if strict:
                    raise ConvergenceError(msg)
                log.warning(msg)
            lam = f.multiplier(c)
            resu = float(np.linalg.norm(f.gradient(c) - lam * c))
            out["lam"].append(lam)
            out["energy"].append(d.energy)
            out["res"].append(d.residual)
            out["resu"].append(resu)
            out["it"].append(d.iterations)
            out["conv"].append(d.converged)
            out["restart"].append(best)
            traces.append(d.energy_trace)
            log_json(
                log,
                {"event": "minimizer", "k": k + 1, "lam": lam, "energy": d.energy,
                 "residual": d.residual, "iterations": d.iterations},
                level="DEBUG",
            )
            prev = np.vstack([prev, c[None, :]])
    return VariationalResult(
        phis=prev, lam=np.array(out["lam"]), energy=np.array(out["energy"]),
        residual=np.array(out["res"]), residual_unconstrained=np.array(out["resu"]),
        iterations=np.array(out["it"]), converged=np.array(out["conv"]),
        restart=np.array(out["restart"]), energy_traces=traces,
    )


def verify_periodic_orbit(
    phi: np.ndarray,
    lam: float,
    p: float,
    T: float,
    *,
    basis: SpectralBasis,
    tol: float = 1e-10,
    sign: float = 1.0,
    samples: int = 101,
) -> float:
    """sup_t |u(t) - e^{-i lam t} phi|_l2 for the Galerkin flow i c' = T c + sign N(c)."""
    if T == 0:
        return 0.0
    c0 = np.asarray(phi, dtype=float)
    prob = VariationalProblem(mu=float(np.linalg.norm(c0)), p=p, J=basis.J, Q=basis.Q)
    f = Functional(prob, basis)

    def rhs(t, c):
        return -1j * (f.T * c + sign * f.nonlinear(c))

    t_eval = np.linspace(0.0, float(T), samples)
    sol = solve_ivp(
        rhs, (0.0, float(T)), c0.astype(complex), method="DOP853",
        rtol=tol, atol=tol * 1e-3, t_eval=t_eval,
    )
    if not sol.success:
        raise ConvergenceError(f"orbit integration failed: {sol.message}")
    ref = np.exp(-1j * lam * sol.t)[None, :] * c0[:, None]
    return float(np.max(np.linalg.norm(sol.y - ref, axis=0)))


def gradient_check(f: Functional, seed: int | None = 0, points: int = 5, h: float = 1e-6) -> float:
    """Max relative gap between grad.d and the central difference of J along d."""
    rngs = RngBundle(seed)
    worst = 0.0
    for i in range(points):
        g = rngs.for_point(i)
        c = _initial(g, f.prob.J, 0)
        c = f.prob.mu * c / np.linalg.norm(c)
        d = g.standard_normal(f.prob.J)
        d /= np.linalg.norm(d)
        fd = (f.energy(c + h * d) - f.energy(c - h * d)) / (2 * h)
        an = float(f.gradient(c) @ d)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return worst
