from __future__ import annotations
import dataclasses
import numpy as np
import pytest

from hokam import reducibility
from hokam.errors import DivergenceError, IntegrityError, ResonanceExcluded, ResonantDivisor
from hokam.fourier import ThetaGrid, kvectors
from hokam.hamiltonian import NormParams
from hokam.hermite import build_basis
from hokam.reducibility import (
    build_Q,
    check_quadratic_class,
    epsilon_boundary,
    floquet_residual,
    integrate_schrodinger,
    kam_predicted_solution,
    matrix_coefficients,
    norm_growth_constant,
    oracle_x_independent,
    reduce,
    truncation_stability,
)
from hokam.registry import cos_theta, cos_theta_decay, zero
from hokam.schedule import make_schedule

GOLDEN = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def _schedule(max_nu: int = 5):
    return make_schedule(0.2, 0.015, 1.0, 4.0, 10.0, max_nu=max_nu, K0=4, K_limit=16)


def test_closed_form_phase_for_cosine():
    grid = ThetaGrid.for_cutoff(1, 1)
    a = np.array([0.5, 0.0, 0.5])
    eps, omega = 0.02, 1.3
    W = oracle_x_independent(a, 1, [omega], eps, grid)
    th = grid.points[:, 0]
    assert np.allclose(W, np.exp(1j * eps * np.sin(th) / omega))

    with pytest.raises(ValueError):
        oracle_x_independent(np.array([0.5, 0.1, 0.5]), 1, [omega], eps, grid)
    with pytest.raises(ResonantDivisor):
        oracle_x_independent(a, 1, [0.0], eps, grid)


def test_matrix_coefficients_are_hermitian_across_k():
    basis = build_basis(5)
    K = 2
    c = matrix_coefficients(cos_theta_decay(), basis, K, ThetaGrid.for_cutoff(1, K))
    kv = kvectors(1, K)
    mirror = [int(np.flatnonzero((kv == -k).all(axis=1))[0]) for k in kv]
    assert np.allclose(c[mirror], np.conj(c))
    assert np.allclose(c, np.swapaxes(c, -1, -2))
    # only k = +-1 carry mass for cos(theta) (1 + x^2)^-1
    assert np.max(np.abs(c[[0, 2, 4]])) < 1e-14
    Q = build_Q(cos_theta_decay(), basis, K)
    assert Q.is_real() and np.all(np.abs(Q.k) == 1)


def test_angle_only_potential_matches_oracle():
    sched = _schedule()
    res = reduce(cos_theta(), [GOLDEN], 0.01, sched, J=4, target=1e-10)
    assert np.allclose(res.Omega_star, 2.0 * np.arange(1, 5) - 1.0, atol=1e-10)
    grid = res.map.grid
    a = np.zeros(9, dtype=complex)
    a[3] = a[5] = 0.5
    W = oracle_x_independent(a, 4, [GOLDEN], 0.01, grid)
    for j in range(4):
        d = res.map.L[:, j, j]
        assert np.allclose(d, (d[0] / W[0]) * W, atol=1e-8)
    df = res.omega_star_frame()
    assert list(df.columns) == ["j", "Omega_star", "shift"]
    assert len(res.floquet(1)) == 4 * 3


def test_rational_rotation_is_excluded():
    with pytest.raises(ResonanceExcluded) as ei:
        reduce(cos_theta(), [1.0], 0.01, _schedule(), J=4)
    assert ei.value.b is not None and abs(ei.value.b) >= 1
    with pytest.raises(ValueError):
        reduce(cos_theta(n=1), [GOLDEN, 1.0], 0.01, _schedule(), J=4)


def test_zero_potential_is_already_reduced():
    res = reduce(zero(), [GOLDEN], 0.01, _schedule(), J=3)
    assert len(res.trace) == 0
    assert np.allclose(res.Omega_star, [1.0, 3.0, 5.0])


def test_unperturbed_integration_is_a_rotation():
    z0 = np.array([1.0, 0.5j, -0.2])
    t, z, norms = integrate_schrodinger(
        zero(), [GOLDEN], 0.0, z0, 3.0, tol=1e-12, t_eval=np.linspace(0, 3, 7)
    )
    expected = z0[None, :] * np.exp(-1j * np.outer(t, [1.0, 3.0, 5.0]))
    assert np.max(np.abs(z - expected)) < 1e-10
    assert np.max(np.abs(norms["norm_p0"] - np.linalg.norm(z0))) < 1e-10
    with pytest.raises(ValueError):
        integrate_schrodinger(zero(), [GOLDEN], 0.0, z0, 1.0, tol=1e-6)
    with pytest.raises(ValueError):
        integrate_schrodinger(zero(), [GOLDEN, 1.0], 0.0, z0, 1.0)


def test_angle_only_integration_picks_up_the_potential_phase():
    # z_j(t) = exp(-i (2j-1) t - i eps sin(omega t) / omega) z_j(0)
    eps = 0.05
    z0 = np.array([0.6, -0.8j, 0.1, 0.0])
    t, z, _ = integrate_schrodinger(
        cos_theta(), [GOLDEN], eps, z0, 4.0, tol=1e-12, t_eval=np.linspace(0, 4, 9), K=4
    )
    phase = np.exp(-1j * np.outer(t, 2.0 * np.arange(1, 5) - 1.0) - 1j * eps * np.sin(GOLDEN * t)[:, None] / GOLDEN)
    assert np.max(np.abs(z - z0[None, :] * phase)) < 1e-9


def test_reduced_flow_reproduces_integration():
    V = cos_theta_decay()
    sched = _schedule()
    eps = 0.01
    res = reduce(V, [GOLDEN], eps, sched, J=6, norm=NormParams(s=0.1), target=1e-10)
    assert res.map is not None
    assert floquet_residual(res, V) < 1e-6

    z0 = np.zeros(6, dtype=complex)
    z0[:2] = [0.8, 0.6j]
    t, z, norms = integrate_schrodinger(
        V, [GOLDEN], eps, z0, 5.0, t_eval=np.linspace(0, 5, 21), K=int(sched.K[0]), basis=res.basis
    )
    zp = kam_predicted_solution(res, z0, t)
    assert np.max(np.abs(z - zp)) < 1e-6
    C = norm_growth_constant(norms, eps)
    assert C["norm_p0"] < 1e-6  # the flow is unitary
    assert np.isfinite(C["norm_p2"])


def _drop_map(phi):
    return None


def _move_angles(phi):
    return dataclasses.replace(phi, theta_map=phi.grid.points + 0.1)


def _translate(phi):
    return dataclasses.replace(phi, translation=phi.translation + 1e-6)


@pytest.mark.parametrize("spoil", [_drop_map, _move_angles, _translate])
def test_reduce_rejects_maps_outside_the_quadratic_class(monkeypatch, spoil):
    engine_run = reducibility.run

    def spoiled_run(*args, **kwargs):
        res = engine_run(*args, **kwargs)
        return dataclasses.replace(res, map=spoil(res.map))

    monkeypatch.setattr(reducibility, "run", spoiled_run)
    with pytest.raises(IntegrityError):
        reduce(cos_theta(), [GOLDEN], 0.01, _schedule(), J=3, target=1e-10)


def test_reduce_keeps_angles_fixed_and_translation_zero():
    res = reduce(cos_theta_decay(), [GOLDEN], 0.01, _schedule(), J=4, norm=NormParams(s=0.1), target=1e-10)
    check_quadratic_class(res.run)
    assert res.map.theta_fixed
    assert np.max(np.abs(res.map.translation)) <= 1e-12


def test_doubling_the_mode_cutoff_leaves_low_frequencies_alone():
    df = truncation_stability(
        cos_theta_decay(), [GOLDEN], 0.005, _schedule(), 8, norm=NormParams(s=0.1), target=1e-10
    )
    assert df["j"].tolist() == [1, 2, 3, 4]
    assert list(df.columns) == ["j", "Omega_star_J", "Omega_star_2J", "difference"]
    assert df["difference"].max() <= 1e-8


def test_epsilon_boundary_stops_at_the_first_failure(monkeypatch):
    table, boundary = epsilon_boundary(
        cos_theta_decay(), [GOLDEN], [0.01, 0.002], _schedule(), J=4, norm=NormParams(s=0.1), target=1e-10
    )
    assert table["eps"].tolist() == [0.002, 0.01]
    assert table["converged"].all() and boundary == 0.01

    engine_reduce = reducibility.reduce

    def fragile_reduce(V, omega, eps, sched, **kw):
        if eps > 0.005:
            raise DivergenceError("majorant grew in two consecutive steps (nu=1)")
        return engine_reduce(V, omega, eps, sched, **kw)

    monkeypatch.setattr(reducibility, "reduce", fragile_reduce)
    table, boundary = epsilon_boundary(
        cos_theta(), [GOLDEN], [0.01, 0.001, 0.02, 0.002], _schedule(), J=3, target=1e-10
    )
    assert table["eps"].tolist() == [0.001, 0.002, 0.01, 0.02]
    assert table["converged"].tolist() == [True, True, False, False]
    assert table.loc[2, "reason"] == "DivergenceError"
    assert boundary == 0.002
