"""
Experiment drivers behind `hokam-run`. Each takes a normalized config and
returns {table name: DataFrame, ..., "summary": dict, "plots": [(series, x, y)],
"dumps": {name: object}}.
"""

from __future__ import annotations
from typing import Any
import numpy as np
import pandas as pd

from .divisors import measure_scan
from .errors import ConfigError
from .fourier import kvectors
from .hamiltonian import NormParams
from .hermite import build_basis, sup_norm_decay
from .io import trace_series
from .lie import symplectic_defect
from .nls import (
    alpha_coefficient,
    eigenfunction_decay,
    eigenvalue_lipschitz,
    frequency_derivative_check,
    make_family,
    mu_expansion,
    neighbour_grid,
    nls_kam_run,
    nondegeneracy_scan,
    perturbation_lipschitz,
    second_derivative_decay,
    spectrum_table,
)
from .reducibility import (
    epsilon_boundary,
    floquet_residual,
    integrate_schrodinger,
    kam_predicted_solution,
    norm_growth_constant,
    oracle_x_independent,
    reduce,
)
from .registry import get_frequency_model, get_potential, register_experiment
from .rng import RngBundle
from .schedule import KamSchedule, default_t, make_schedule
from .variational import Functional, VariationalProblem, gradient_check, minimize, verify_periodic_orbit

GOLDEN_OMEGA = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def schedule_from(cfg: dict, n: int) -> KamSchedule:
    sc = cfg["schedule"]
    tau = float(sc["tau"]) if sc["tau"] is not None else n + 3.0
    t = float(sc["t"]) if sc["t"] is not None else default_t(tau, n)
    return make_schedule(
        sc["s0"], sc["alpha0"], sc["M0"], tau, t, sc["c0"], sc["c1"], sc["max_nu"],
        r0=cfg["norm"]["r"], K0=sc["K0"], K_limit=sc["K_limit"],
    )


def norm_from(cfg: dict, J: int) -> NormParams:
    nm = cfg["norm"]
    beta = nm["beta"]
    if beta == "auto":
        # sup-norm decay of h_j, at least a small positive exponent
        beta = max(-sup_norm_decay(max(J, 8)), 1e-3)
    return NormParams(s=nm["s"], r=nm["r"], beta=float(beta), p=nm["p"])


def _omega(cfg: dict, n: int) -> np.ndarray:
    om = cfg["reduce"]["omega"]
    if om is None:
        if n != 1:
            raise ConfigError("reduce.omega is required when n > 1")
        return np.array([GOLDEN_OMEGA])
    return np.asarray(om, dtype=float)


def _potential(cfg: dict):
    rd = cfg["reduce"]
    n = len(rd["omega"]) if rd["omega"] is not None else 1
    return get_potential(rd["potential"])(n=n, **rd["potential_args"])


def _reduce_kwargs(cfg: dict) -> dict[str, Any]:
    rd, sc = cfg["reduce"], cfg["schedule"]
    return {
        "J": cfg["basis"]["J"],
        "Q_nodes": cfg["basis"]["Q"],
        "norm": norm_from(cfg, cfg["basis"]["J"]),
        "target": 0.0 if rd["stop"] == "max_nu" else sc["target"],
        "strict": cfg["meta"]["strict_gate"],
        "K_potential": rd["K_potential"],
    }


def _initial_state(seed: int | None, J: int) -> np.ndarray:
    g = RngBundle(seed).for_point(0)
    z = (g.standard_normal(J) + 1j * g.standard_normal(J)) * np.exp(-np.arange(J) / 2.0)
    return z / np.linalg.norm(z)


@register_experiment("reduce")
def run_reduce(cfg: dict, **_: Any) -> dict[str, Any]:
    V = _potential(cfg)
    omega = _omega(cfg, V.n)
    eps = cfg["reduce"]["epsilon"]
    sched = schedule_from(cfg, V.n)
    kw = _reduce_kwargs(cfg)
    res = reduce(V, omega, eps, sched, **kw)

    out: dict[str, Any] = {
        "trace": res.trace,
        "omega_star": res.omega_star_frame(),
        "floquet": res.floquet(cfg["reduce"]["floquet_K"]),
    }
    summary: dict[str, Any] = {
        "steps": int(len(res.trace)),
        "eps_final": res.run.eps_final,
        "energy": res.run.energy,
        "max_shift": float(np.max(np.abs(res.omega_star_frame()["shift"]))),
        "notes": res.notes,
    }
    dumps: dict[str, Any] = {"Q": res.Q, "P_final": res.run.P, "map": res.map}
    summary["symplectic_defect"] = symplectic_defect(res.map)
    summary["floquet_residual"] = floquet_residual(res, V)

    K = int(sched.K[0]) if kw["K_potential"] is None else int(kw["K_potential"])
    z0 = _initial_state(cfg["meta"]["seed_root"], res.basis.J)
    T = cfg["reduce"]["integrate_T"]
    t, z, norms = integrate_schrodinger(
        V, omega, eps, z0, T, tol=cfg["reduce"]["integrate_tol"], t_eval=np.linspace(0.0, T, 201),
        K=K, basis=res.basis,
    )
    zp = kam_predicted_solution(res, z0, t)
    norms["distance"] = np.linalg.norm(z - zp, axis=1)
    out["crosscheck"] = norms
    summary["max_distance"] = float(norms["distance"].max())
    summary["norm_growth_C"] = norm_growth_constant(norms, eps) if eps > 0 else {}

    if cfg["reduce"]["epsilon_scan"]:
        kw.pop("target")
        table, boundary = epsilon_boundary(
            V, omega, cfg["reduce"]["epsilon_scan"], sched, target=cfg["schedule"]["target"], **kw
        )
        out["boundary"] = table
        summary["epsilon_boundary"] = boundary

    out["summary"] = summary
    out["plots"] = [trace_series(res.trace)]
    out["dumps"] = dumps
    return out


@register_experiment("oracle")
def run_oracle(cfg: dict, **_: Any) -> dict[str, Any]:
    V = _potential(cfg)
    if not V.x_independent:
        raise ConfigError("reduce.potential must be x-independent for the oracle experiment")
    omega = _omega(cfg, V.n)
    eps = cfg["reduce"]["epsilon"]
    sched = schedule_from(cfg, V.n)
    kw = _reduce_kwargs(cfg)
    res = reduce(V, omega, eps, sched, **kw)
    grid = res.map.grid
    K = int(sched.K[0]) if kw["K_potential"] is None else int(kw["K_potential"])
    a = grid.to_coefficients(V(grid.points, np.zeros(1))[:, 0], K)
    a[~np.any(kvectors(V.n, K) != 0, axis=1)] = 0.0
    W = oracle_x_independent(a, K, omega, eps, grid)
    J = res.basis.J
    diag = np.stack([res.map.L[:, j, j] for j in range(J)], axis=1)  # (P, J)
    phase = diag[0] / W[0]
    deviation = np.max(np.abs(diag - phase[None, :] * W[:, None]), axis=0)
    Lz = res.map.L[:, :J, :J]
    off = float(np.max(np.abs(Lz - np.einsum("pj,jk->pjk", diag, np.eye(J)))))

    j = np.arange(1, J + 1)
    table = pd.DataFrame(
        {
            "j": j,
            "Omega_star": res.Omega_star,
            "expected": 2.0 * j - 1.0,
            "diff": np.abs(res.Omega_star - (2.0 * j - 1.0)),
            "diag_deviation": deviation,
            "phase_re": phase.real,
            "phase_im": phase.imag,
        }
    )
    summary = {
        "max_diff": float(table["diff"].max()),
        "max_diag_deviation": float(deviation.max()),
        "max_offdiag": off,
        "global_phase": complex(phase[0]),
        "symplectic_defect": symplectic_defect(res.map),
        "steps": int(len(res.trace)),
    }
    return {
        "oracle_diff": table,
        "trace": res.trace,
        "summary": summary,
        "plots": [trace_series(res.trace)],
        "dumps": {"map": res.map, "Q": res.Q},
    }


@register_experiment("spectrum")
def run_spectrum(cfg: dict, **_: Any) -> dict[str, Any]:
    sp = cfg["spectrum"]
    basis = build_basis(cfg["basis"]["J"], cfg["basis"]["Q"])
    fam = make_family(sp["n"], basis, cfg["meta"]["seed_root"], sp["k_max"])
    lam = spectrum_table(fam, sp["xi"], sp["nu_series"], basis)
    decay, slope = eigenfunction_decay(fam, sp["nu"], sp["xi"], basis, tuple(sp["j_range"]))
    lip, lip_slope = eigenvalue_lipschitz(fam, sp["nu"], basis, seed=cfg["meta"]["seed_root"])
    jd, kd = sp["derivative_jk"]
    an, fd = frequency_derivative_check(fam, sp["nu"], sp["xi"], int(jd), int(kd), basis)
    mu, mu_err = mu_expansion(basis, min(basis.J, 16))

    first = lam[lam["j"] == 1].sort_values("nu", ascending=False)
    ratios = first["ratio"].to_numpy()
    summary = {
        "derivative_analytic": an,
        "derivative_fd": fd,
        "derivative_rel_gap": abs(an - fd) / max(abs(an), 1e-300),
        "decay_slope": slope,
        "lipschitz_slope": lip_slope,
        "ratio_monotone": bool(np.all(np.diff(ratios) < 0)),
        "mu_reconstruction_error": mu_err,
        "hermite_sup_decay": sup_norm_decay(basis.J),
        "alpha": fam.alpha,
    }
    plots = [
        (f"ratio_j{j}", lam.loc[lam["j"] == j, "nu"], lam.loc[lam["j"] == j, "ratio"])
        for j in range(1, sp["n"] + 1)
    ]
    plots.append(("phi_distance", decay["j"], decay["distance"]))
    return {"lambda": lam, "decay": decay, "lipschitz": lip, "summary": summary, "plots": plots}


@register_experiment("nls")
def run_nls(cfg: dict, **_: Any) -> dict[str, Any]:
    nl = cfg["nls"]
    n = len(nl["actions"])
    basis = build_basis(cfg["basis"]["J"], cfg["basis"]["Q"])
    seed = cfg["meta"]["seed_root"]
    fam = make_family(n, basis, seed, cfg["spectrum"]["k_max"])
    sched = schedule_from(cfg, n)
    norm = norm_from(cfg, basis.J)
    ex = cfg["execution"]
    J_ext = min(8, basis.J - n)
    integrality, samples, nd = nondegeneracy_scan(
        fam, nl["nu"], basis, K=int(sched.K[0]), J=J_ext, alpha=float(sched.alpha[0]),
        tau=sched.tau, samples=nl["nondeg_samples"], seed=seed, backend=ex["backend"],
        threads=ex["threads"], show_progress=ex["show_progress"],
    )
    direct, via_mu = alpha_coefficient(fam, 1, basis)
    res = nls_kam_run(
        fam, nl["actions"], nl["xi"], nl["nu"], nl["epsilon"], nl["m"], basis, sched,
        norm=norm, C0=nl["C0"], D=nl["D"], K=nl["K"], steps=nl["steps"],
    )
    dd, dd_slope = second_derivative_decay(res.P0)
    grid = neighbour_grid(nl["xi"]) if nl["lipschitz_grid"] is None else np.asarray(nl["lipschitz_grid"])
    lip = perturbation_lipschitz(
        fam, nl["actions"], grid, nl["nu"], nl["epsilon"], nl["m"], basis, norm, D=nl["D"], K=nl["K"]
    )
    summary = {
        **nd,
        "alpha_coefficient_direct": direct,
        "alpha_coefficient_mu": via_mu,
        "resonant_reduction": res.reduction,
        "first_contraction": res.first_contraction,
        "tail_majorant": res.tail_majorant,
        "P_lipschitz": lip,
        "drift": res.drift,
        "drift_constant": res.drift_constant,
        "second_derivative_slope": dd_slope,
        "steps": int(len(res.trace)),
        "D": nl["D"],
        "notes": res.notes,
    }
    return {
        "trace": res.trace,
        "nondegeneracy": integrality,
        "nondegeneracy_samples": samples,
        "second_derivative": dd,
        "summary": summary,
        "plots": [trace_series(res.trace)],
        "dumps": {"P0": res.P0, "P_final": res.run.P},
    }


@register_experiment("variational")
def run_variational(cfg: dict, **_: Any) -> dict[str, Any]:
    va = cfg["variational"]
    prob = VariationalProblem(
        mu=va["mu"], p=va["p"], J=cfg["basis"]["J"], count=va["count"], tol=va["tol"],
        max_iter=va["max_iter"], restarts=va["restarts"], focusing=va["focusing"],
        focusing_eps=va["focusing_eps"], Q=cfg["basis"]["Q"],
    )
    basis = build_basis(prob.J, prob.Q)
    ex = cfg["execution"]
    res = minimize(
        prob, cfg["meta"]["seed_root"], basis=basis, backend=ex["backend"], threads=ex["threads"],
        show_progress=ex["show_progress"], strict=cfg["meta"]["strict_gate"],
    )
    table = res.to_frame()
    table["orbit_deviation"] = [
        verify_periodic_orbit(res.phis[k], res.lam[k], prob.p, va["T"], basis=basis, sign=prob.sign)
        for k in range(prob.count)
    ]
    k, j = np.meshgrid(np.arange(1, prob.count + 1), np.arange(1, prob.J + 1), indexing="ij")
    coeffs = pd.DataFrame({"k": k.ravel(), "j": j.ravel(), "c": res.phis.ravel()})
    ortho = res.phis @ res.phis.T / prob.mu**2
    summary = {
        "max_residual": float(table["residual"].max()),
        "max_orthogonality": float(np.max(np.abs(ortho - np.eye(prob.count)))),
        "gradient_check": gradient_check(Functional(prob, basis), cfg["meta"]["seed_root"]),
        "max_orbit_deviation": float(table["orbit_deviation"].max()),
    }
    plots = [(f"energy_k{i + 1}", np.arange(len(tr)), tr) for i, tr in enumerate(res.energy_traces)]
    return {"variational": table, "coefficients": coeffs, "summary": summary, "plots": plots}


@register_experiment("measure")
def run_measure(cfg: dict, **_: Any) -> dict[str, Any]:
    ms, ex = cfg["measure"], cfg["execution"]
    model = get_frequency_model(ms["omega_model"])
    table = measure_scan(
        ms["box"], ms["alphas"], ms["tau"], ms["K"], ms["J"], model, ms["samples"],
        cfg["meta"]["seed_root"], backend=ex["backend"], threads=ex["threads"],
        show_progress=ex["show_progress"],
    )
    frac = table["fraction_excluded"].to_numpy()
    summary = {
        "strictly_decreasing": bool(np.all(np.diff(frac) < 0)),
        "first": float(frac[0]),
        "last": float(frac[-1]),
    }
    return {
        "measure": table,
        "summary": summary,
        "plots": [("excluded_fraction", table["alpha"], table["fraction_excluded"])],
    }
