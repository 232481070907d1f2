"""
The Newton iteration: one KAM step solves the homological equation for the
quadratic part of P, moves the frequencies by [R] and conjugates with the
time-one map of the generator. `run` iterates along a KamSchedule.

Two paths:
  quadratic   P of weighted degree <= 2 with frozen angles; P' = (N + P) o phi - N'
              is computed per grid point and maps are composed eagerly.
  Lie series  general P; P' = P - R + {P,F} + sum_{k>=2} T_k with
              T_1 = N_hat + c - R + {P,F}, T_k = {T_{k-1}, F}/k.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Literal
import numpy as np
import pandas as pd

from .divisors import FrequencySet, ResonanceReport, certify
from .errors import ContractionError, ConvergenceError, DivergenceError, ResonanceExcluded
from .fourier import ThetaGrid
from .hamiltonian import (
    NormParams,
    TaylorHamiltonian,
    majorant_norm,
    normal_form,
    poisson_bracket,
    taylor_truncate,
)
from .homological import HomologicalSolution, frequency_update, solve
from .lie import SymplecticMap, compose, compose_maps, identity_map, time_one
from .schedule import KamSchedule
from .types import TraceRow
from .utils.logging import get_logger, log_json
from .utils.profiling import Timer

log = get_logger("hokam.engine")


@dataclass(frozen=True, eq=False)
class StepResult:
    freqs: FrequencySet
    P: TaylorHamiltonian
    phi: SymplecticMap | None
    F: TaylorHamiltonian
    solution: HomologicalSolution
    record: TraceRow
    recertified: ResonanceReport | None = None
    energy: complex = 0j


@dataclass(frozen=True, eq=False)
class KamRunResult:
    freqs: FrequencySet
    P: TaylorHamiltonian
    map: SymplecticMap | None
    generators: list[TaylorHamiltonian]
    trace: pd.DataFrame
    energy: complex = 0j
    final_report: ResonanceReport | None = None
    maps: list[SymplecticMap] = field(default_factory=list)

    @property
    def eps_final(self) -> float:
        return float(self.trace["eps_next"].iloc[-1]) if len(self.trace) else 0.0


def _constant(H: TaylorHamiltonian) -> tuple[complex, TaylorHamiltonian]:
    zero = ~np.any(H.exps != 0, axis=1)
    c = complex(np.sum(H.coeffs[zero]))
    return c, H.select(~zero)


def step_norm(norm: NormParams, sched: KamSchedule, nu: int) -> NormParams:
    """Angle strip follows the schedule; the radius stays at the configured value."""
    return NormParams(s=float(sched.s[nu]), r=norm.r, beta=norm.beta, p=norm.p, weight=norm.weight)


def freq_drift(freqs: FrequencySet, freqs0: FrequencySet, beta: float) -> float:
    j = np.arange(1, freqs.J + 1, dtype=float)
    dw = float(np.max(np.abs(freqs.omega - freqs0.omega), initial=0.0))
    dW = float(np.max(j ** (2 * beta) * np.abs(freqs.Omega - freqs0.Omega), initial=0.0))
    return dw + dW


def _lie_update(
    P: TaylorHamiltonian,
    R: TaylorHamiltonian,
    sol: HomologicalSolution,
    cap: int,
    K: int,
    z_cap: int | None,
    tol: float = 1e-14,
    max_terms: int = 30,
) -> TaylorHamiltonian:
    F = sol.F
    PF = poisson_bracket(P, F, cap, K=K, z_cap=z_cap)
    const = TaylorHamiltonian.from_arrays(
        P.n, P.J, np.zeros((1, 2 * P.n + 2 * P.J)), [sol.constant], K=0, D=0
    )
    T = sol.N_hat + const - R + PF
    out = P - R + PF
    for k in range(2, max_terms + 2):
        T = poisson_bracket(T, F, cap, K=K, z_cap=z_cap).scale(1.0 / k)
        out = out + T
        if T.mass() <= tol * max(out.mass(), np.finfo(float).tiny):
            return out
    raise ConvergenceError(f"Lie series did not converge in {max_terms} terms")


def kam_step(
    freqs: FrequencySet,
    P: TaylorHamiltonian,
    sched: KamSchedule,
    nu: int,
    *,
    norm: NormParams,
    grid: ThetaGrid | None = None,
    freqs0: FrequencySet | None = None,
    mode: Literal["exact", "ode"] = "exact",
    cap: int | None = None,
    z_cap: int | None = None,
    strict: bool = False,
) -> StepResult:
    """
    One Newton step at index nu. A missed smallness gate is recorded in gate_ok
    and a contraction failure is logged; both raise when strict. Resonant
    divisors always raise.
    """
    freqs0 = freqs if freqs0 is None else freqs0
    nu_next = min(nu + 1, sched.max_nu)
    K = int(sched.K[nu])
    K_out = max(int(sched.K[nu_next]), P.K if P.nnz else 0)
    cap = P.D if cap is None else int(cap)
    np_nu = step_norm(norm, sched, nu)

    with Timer() as tm:
        report = majorant_norm(P, np_nu)
        eps = report.smallness
        gate = sched.gate(nu, eps)
        gate_ok = eps <= gate
        if not gate_ok:
            msg = f"[gate] nu={nu} smallness {eps:.3e} above bound {gate:.3e}"
            if strict:
                raise DivergenceError(msg)
            # recorded in the trace as gate_ok
            log.info(msg)

        P_low, _ = P.restrict(K=K)
        R, _ = taylor_truncate(P_low)
        sol = solve(R, freqs, float(sched.alpha[nu]), sched.tau, K)
        F = sol.F
        d_omega, d_Omega = frequency_update(sol.N_hat)
        new = freqs.with_updates(d_omega, d_Omega)

        quadratic = (P.nnz == 0 or np.max(P.weighted_degree) <= 2) and not np.any(F.m)
        phi = None
        if quadratic:
            if grid is None:
                grid = ThetaGrid.for_cutoff(P.n, K_out)
            phi = time_one(F, grid, mode)
            N = normal_form(freqs.omega, freqs.Omega)
            H, tail = compose(N + P, phi, 2, K=min(K_out, grid.max_cutoff // 2))
            Pn = H - normal_form(new.omega, new.Omega)
            shift, Pn = _constant(Pn)
        else:
            if mode == "ode" and grid is not None:
                phi = time_one(F, grid, "ode")
            Pn = _lie_update(P, R, sol, cap, K_out, z_cap)
            tail = Pn.discarded - P.discarded
            shift, Pn = _constant(Pn)
            shift += sol.constant

        rep = None
        if freqs.J > 0:
            rep = certify(new, float(sched.alpha[nu_next]), sched.tau, K, new.J)
            if not rep.passed:
                msg = (
                    f"[certify] nu={nu} updated frequencies fail at alpha={sched.alpha[nu_next]:.3e}, "
                    f"worst {rep.worst_index} value {rep.worst_value:.3e}"
                )
                if strict:
                    idx = rep.worst_index
                    raise ResonanceExcluded(msg, k=idx.k if idx else None, l=idx.l if idx else None)
                log.warning(msg)

        eps_next = majorant_norm(Pn, step_norm(norm, sched, nu_next)).smallness
        if eps_next > eps and eps > 0:
            msg = f"[step] nu={nu} majorant grew {eps:.3e} -> {eps_next:.3e}"
            if strict:
                raise ContractionError(msg)
            log.warning(msg)

    record: TraceRow = {
        "nu": int(nu),
        "eps_majorant": float(eps),
        "eps_next": float(eps_next),
        "eps_plus": float(report.zz_plus_part),
        "alpha_nu": float(sched.alpha[nu]),
        "sigma_nu": float(sched.sigma[nu]),
        "K_nu": K,
        "min_divisor": float(sol.min_divisor),
        "freq_drift": freq_drift(new, freqs0, norm.beta),
        "seconds": float(tm.elapsed),
        "tail": float(tail),
        "gate": float(gate),
        "gate_ok": bool(gate_ok),
    }
    log.info(
        f"[step] nu={nu} eps={eps:.3e} -> {eps_next:.3e} K={K} "
        f"min_div={sol.min_divisor:.3e} drift={record['freq_drift']:.3e}"
    )
    log_json(log, {"event": "kam_step", **record}, level="DEBUG")
    return StepResult(new, Pn, phi, F, sol, record, rep, shift)


def run(
    freqs0: FrequencySet,
    P0: TaylorHamiltonian,
    sched: KamSchedule,
    *,
    norm: NormParams,
    target: float = 1e-12,
    max_nu: int | None = None,
    mode: Literal["exact", "ode"] = "exact",
    cap: int | None = None,
    z_cap: int | None = None,
    strict: bool = False,
    grid: ThetaGrid | None = None,
) -> KamRunResult:
    """
    Iterate kam_step until the majorant drops below target or max_nu steps ran.
    All steps share one angle grid (resolving the largest scheduled cutoff) so
    the per-step maps compose on it.
    """
    max_nu = sched.max_nu if max_nu is None else min(int(max_nu), sched.max_nu)
    if grid is None:
        K_top = max(int(np.max(sched.K[: max_nu + 1])), P0.K if P0.nnz else 0)
        grid = ThetaGrid.for_cutoff(P0.n, K_top)

    freqs, P = freqs0, P0
    phi_total = identity_map(grid, P0.J)
    maps: list[SymplecticMap] = []
    gens: list[TaylorHamiltonian] = []
    rows: list[TraceRow] = []
    energy = 0j
    growth = 0
    composable = True

    with Timer("kam run", logger=log):
        for nu in range(max_nu + 1):
            eps = majorant_norm(P, step_norm(norm, sched, nu)).smallness
            if eps <= target:
                log.info(f"[done] nu={nu} eps={eps:.3e} <= target {target:.1e}")
                break
            res = kam_step(
                freqs, P, sched, nu, norm=norm, grid=grid, freqs0=freqs0, mode=mode,
                cap=cap, z_cap=z_cap, strict=strict,
            )
            energy += res.energy
            rows.append(res.record)
            gens.append(res.F)
            if res.phi is not None and composable:
                maps.append(res.phi)
                if res.phi.theta_fixed:
                    phi_total = compose_maps(phi_total, res.phi)
                else:
                    composable = False
            else:
                composable = False
            growth = growth + 1 if res.record["eps_next"] > res.record["eps_majorant"] else 0
            if growth >= 2:
                raise DivergenceError(f"majorant grew in two consecutive steps (nu={nu})")
            freqs, P = res.freqs, res.P

    trace = pd.DataFrame.from_records(
        rows,
        columns=[
            "nu", "eps_majorant", "alpha_nu", "sigma_nu", "K_nu", "min_divisor",
            "freq_drift", "seconds", "tail", "eps_next", "eps_plus", "gate", "gate_ok",
        ],
    )
    final = None
    if freqs.J > 0:
        K_last = int(sched.K[min(len(rows), sched.max_nu)])
        final = certify(freqs, 0.5 * float(sched.alpha[0]), sched.tau, K_last)
    return KamRunResult(
        freqs=freqs, P=P, map=phi_total if composable else None, generators=gens,
        trace=trace, energy=energy, final_report=final, maps=maps,
    )


def conjugacy_residual(
    freqs0: FrequencySet, P0: TaylorHamiltonian, result: KamRunResult, norm: NormParams
) -> float:
    """Majorant of (N0 + P0) o Phi* - N* - energy; needs a composed map."""
    if result.map is None:
        raise ValueError("run produced no composed map (angles moved or Lie path)")
    N0 = normal_form(freqs0.omega, freqs0.Omega)
    grid = result.map.grid
    H, _ = compose(N0 + P0, result.map, 2, K=grid.max_cutoff // 2)
    D = H - normal_form(result.freqs.omega, result.freqs.Omega)
    _, D = _constant(D)
    return majorant_norm(D, norm).total
