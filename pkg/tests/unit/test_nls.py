from __future__ import annotations
import numpy as np
import pytest

from hokam.hamiltonian import NormParams, majorant_norm
from hokam.hermite import build_basis, hermite_functions, quadrature_rule
from hokam.nls import (
    alpha_coefficient,
    build_P,
    eigenfunction_decay,
    eigenvalue_lipschitz,
    frequency_derivative_check,
    make_family,
    mu_expansion,
    neighbour_grid,
    nls_kam_run,
    nondegeneracy_scan,
    perturbation_lipschitz,
    perturbed_spectrum,
    second_derivative_decay,
    spectrum_table,
)
from hokam.schedule import make_schedule


@pytest.fixture(scope="module")
def basis():
    return build_basis(12)


@pytest.fixture(scope="module")
def family(basis):
    return make_family(1, basis, seed=7, k_max=6)


def test_dual_functions_are_biorthogonal(basis):
    fam = make_family(2, basis, seed=1, k_max=6)
    x, w = quadrature_rule(basis, 2.0)
    G = (fam.f_values(x) * w) @ (hermite_functions(2, x) ** 2).T
    assert np.allclose(G, np.eye(2), atol=1e-12)
    assert fam.alpha.shape == (4,) and np.all(np.abs(fam.alpha) <= 0.5)
    # same seed, same family
    assert np.array_equal(make_family(2, basis, seed=1, k_max=6).alpha, fam.alpha)


def test_unperturbed_spectrum_is_the_oscillator(family, basis):
    sp = perturbed_spectrum(family, 0.0, [0.3], basis)
    assert np.allclose(sp.lam, 2.0 * np.arange(1, 13) - 1.0)
    assert sp.orthonormality_defect() < 1e-14
    with pytest.raises(ValueError):
        perturbed_spectrum(family, 0.01, [1.5], basis)


def test_first_order_prediction(family, basis):
    df = spectrum_table(family, [0.6], [1e-2, 1e-3], basis, j_max=4)
    big = df[df["nu"] == 1e-2]["remainder"].abs().max()
    small = df[df["nu"] == 1e-3]["remainder"].abs().max()
    assert small < big / 50.0
    internal = df[df["j"] == 1].sort_values("nu")
    assert internal["ratio"].iloc[0] < internal["ratio"].iloc[1]
    assert df[df["j"] > 1]["ratio"].isna().all()


def test_frequency_derivative(family, basis):
    analytic, fd = frequency_derivative_check(family, 0.01, [0.2], 1, 1, basis)
    assert np.isclose(analytic, fd, rtol=1e-6)
    analytic, fd = frequency_derivative_check(family, 0.01, [0.2], 3, 1, basis)
    assert np.isclose(analytic, fd, rtol=1e-6)


def test_square_expansion_and_alpha_coefficient(basis, family):
    mu, err = mu_expansion(basis, 6)
    assert err < 1e-10
    assert np.allclose(mu, np.triu(mu))
    direct, formula = alpha_coefficient(family, 2, basis)
    assert np.isclose(direct, formula, rtol=1e-10)
    with pytest.raises(ValueError):
        alpha_coefficient(family, 12, basis)


def test_nondegeneracy_tables(family, basis):
    integ, scan, summary = nondegeneracy_scan(
        family, 0.01, basis, K=3, J=4, alpha=1e-3, tau=3.0, samples=6, seed=2
    )
    assert len(integ) == 4 + 2 * 6
    assert np.all((integ["dist_to_int"] >= 0) & (integ["dist_to_int"] <= 0.5))
    assert len(scan) == 6 and 0.0 <= summary["excluded_fraction"] <= 1.0
    with pytest.raises(ValueError):
        nondegeneracy_scan(family, 0.01, basis, K=3, J=12, alpha=1e-3, tau=3.0, samples=2, seed=2)


def test_quartic_perturbation_is_real_and_capped(family, basis):
    P = build_P(family, [2.0], [0.5], 0.02, 1e-3, 1, basis)
    assert P.nnz > 0
    assert P.is_real(1e-10)
    assert np.max(P.weighted_degree) <= 2 and np.max(P.z_degree) <= 2
    assert np.max(np.abs(P.k)) <= 2
    assert P.J == basis.J - 1
    df, slope = second_derivative_decay(P)
    assert list(df.columns) == ["j", "A_jj"] and np.isfinite(slope)
    assert build_P(family, [2.0], [0.5], 0.02, 0.0, 1, basis).nnz == 0
    with pytest.raises(ValueError):
        build_P(family, [-1.0], [0.5], 0.02, 1e-3, 1, basis)


def test_kam_run_guards(family, basis):
    sched = make_schedule(0.2, 1e-3, 1.0, 4.0, 10.0, max_nu=3, K0=4)
    with pytest.raises(ValueError):
        nls_kam_run(family, [2.0], [0.5], 0.001, 1e-3, 1, basis, sched)
    with pytest.raises(ValueError):
        nls_kam_run(family, [0.5], [0.5], 0.02, 1e-3, 1, basis, sched, norm=NormParams(r=1.0))


def test_kam_run_reduces_resonant_part(family, basis):
    sched = make_schedule(0.2, 1e-3, 1.0, 4.0, 10.0, max_nu=3, K0=4)
    res = nls_kam_run(
        family, [2.0], [0.5], 0.02, 1e-3, 1, basis, sched, norm=NormParams(r=0.5), D=2, steps=2
    )
    assert 1 <= len(res.trace) <= 2
    assert res.reduction < 1.0
    assert np.isfinite(res.drift) and res.drift_constant < 5.0


def test_quartic_cap_contracts_at_the_first_step(family, basis):
    sched = make_schedule(0.2, 1e-3, 1.0, 4.0, 10.0, max_nu=3, K0=4)
    res = nls_kam_run(
        family, [2.0], [0.5], 0.02, 1e-3, 1, basis, sched, norm=NormParams(r=0.5), D=4, steps=3
    )
    assert np.max(res.P0.weighted_degree) > 2
    first = res.trace.iloc[0]
    assert first["nu"] == 0
    assert first["eps_next"] < first["eps_majorant"]
    assert 0.0 < res.first_contraction < 1.0
    assert res.reduction < 1.0
    # the degree > 2 part is carried, not removed
    assert res.tail_majorant > 0.0
    assert np.all(np.diff(res.trace["eps_next"].to_numpy()) <= 0.0)


def test_perturbation_lipschitz_on_two_points(family, basis):
    norm = NormParams(r=0.5)
    grid = neighbour_grid([0.5])
    assert np.allclose(grid, [[0.5], [0.49]])
    assert np.allclose(neighbour_grid([-1.0, 0.0]), [[-1.0, 0.0], [-0.99, -0.01]])
    lip = perturbation_lipschitz(family, [2.0], grid, 0.02, 1e-3, 1, basis, norm)
    Pa = build_P(family, [2.0], [0.5], 0.02, 1e-3, 1, basis)
    Pb = build_P(family, [2.0], [0.49], 0.02, 1e-3, 1, basis)
    assert np.isclose(lip, majorant_norm(Pa - Pb, norm).total / 0.01)
    assert lip > 0.0
    with pytest.raises(ValueError):
        perturbation_lipschitz(family, [2.0], [[0.5]], 0.02, 1e-3, 1, basis, norm)


def test_eigenfunction_closeness_decays_in_j():
    big = build_basis(32)
    fam = make_family(1, big, seed=7, k_max=6)
    df, slope = eigenfunction_decay(fam, 1e-3, [1.0], big, (2, 16))
    assert df["j"].tolist() == list(range(2, 17))
    assert np.all(np.isfinite(df["distance"])) and np.all(df["distance"] > 0)
    assert slope < 0.0


def test_eigenvalue_lipschitz_is_bounded_by_the_potential(family, basis):
    nu = 0.01
    df, slope = eigenvalue_lipschitz(family, nu, basis, pairs=8, seed=3)
    assert list(df.columns) == ["j", "lipschitz"] and len(df) == basis.J
    # |lambda_j(a) - lambda_j(b)| <= nu |a - b| sup |f_1 + g|
    x = np.linspace(-12.0, 12.0, 24001)
    sup = float(np.max(np.abs(family.values([1.0], x))))
    assert np.all(df["lipschitz"] >= 0.0)
    assert df["lipschitz"].max() <= 1.05 * nu * sup
    assert np.isfinite(slope) and slope < 0.0
    again, _ = eigenvalue_lipschitz(family, nu, basis, pairs=8, seed=3)
    assert np.array_equal(df["lipschitz"].to_numpy(), again["lipschitz"].to_numpy())
