from __future__ import annotations
import numpy as np
import pytest

from hokam.hamiltonian import (
    NormParams,
    TaylorHamiltonian,
    from_text,
    lipschitz_seminorm,
    majorant_norm,
    mean_value,
    normal_form,
    poisson_bracket,
    resonant_part,
    taylor_truncate,
    to_text,
)


def _sample(n: int = 1, J: int = 3) -> TaylorHamiltonian:
    return TaylorHamiltonian.from_terms(
        n,
        J,
        [
            (((1,), (0,), {1: 1}, {2: 1}), 0.3 + 0.1j),
            (((-1,), (0,), {2: 1}, {1: 1}), 0.3 - 0.1j),
            (((0,), (1,), {}, {}), 0.5),
            (((2,), (0,), {1: 2}, {}), 0.05j),
            (((-2,), (0,), {}, {1: 2}), -0.05j),
            (((0,), (0,), {3: 1}, {3: 1}), 0.2),
        ],
        K=2,
        D=2,
    )


def test_bracket_with_normal_form_multiplies_by_divisor():
    N = normal_form(np.array([0.7]), np.array([1.0, 3.0]), K=1)
    mono = TaylorHamiltonian.from_terms(1, 2, [(((1,), (0,), {1: 1}, {2: 1}), 2.0 - 1.0j)], K=1, D=2)
    B = poisson_bracket(mono, N)
    assert B.nnz == 1
    got = B.coefficient((1,), (0,), {1: 1}, {2: 1})
    assert np.isclose(got, 1j * (0.7 + 1.0 - 3.0) * (2.0 - 1.0j))
    assert B.discarded == 0.0


def test_bracket_is_antisymmetric_and_real_on_real_inputs():
    A = _sample()
    N = normal_form(np.array([0.9]), np.array([1.0, 3.0, 5.0]), K=2)
    AB = poisson_bracket(A, N)
    BA = poisson_bracket(N, A)
    assert (AB + BA).mass() < 1e-14
    assert A.is_real() and AB.is_real()


def test_bracket_drops_above_cap_and_tracks_mass():
    A = TaylorHamiltonian.from_terms(1, 2, [(((0,), (0,), {1: 2}, {}), 1.0)], K=0, D=2)
    B = TaylorHamiltonian.from_terms(1, 2, [(((0,), (0,), {}, {1: 2}), 1.0)], K=0, D=2)
    full = poisson_bracket(A, B, cap=4)
    capped = poisson_bracket(A, B, cap=1)
    # {z^2, zbar^2} = 4i z zbar, degree 2
    assert np.isclose(full.coefficient((0,), (0,), {1: 1}, {1: 1}), 4j)
    assert capped.nnz == 0
    assert np.isclose(capped.discarded, 4.0)


def test_text_dump_round_trip():
    H = _sample()
    back = from_text(to_text(H))
    assert (back.n, back.J, back.K, back.D) == (H.n, H.J, H.K, H.D)
    assert np.array_equal(back.exps, H.exps)
    assert np.array_equal(back.coeffs, H.coeffs)


def test_majorant_is_homogeneous_and_monotone_in_s():
    H = _sample()
    p = NormParams(s=0.1, r=1.0)
    a = majorant_norm(H, p).total
    assert np.isclose(majorant_norm(H.scale(3.0), p).total, 3.0 * a)
    assert majorant_norm(H, NormParams(s=0.3, r=1.0)).total > a
    assert majorant_norm(TaylorHamiltonian.zero(1, 3), p).total == 0.0


def test_lipschitz_seminorm_on_a_parameter_grid():
    H = _sample()
    p = NormParams(s=0.1, r=1.0)
    # H(xi) = (1 + 2 xi) H: the quotient is 2 <H> for any pair
    fam = [H.scale(1.0 + 2.0 * xi) for xi in (0.0, 0.25)]
    assert np.isclose(lipschitz_seminorm(fam, np.array([0.0, 0.25]), p), 2.0 * majorant_norm(H, p).total)
    # repeated points are skipped
    fam3 = fam + [H.scale(1.5)]
    assert np.isclose(lipschitz_seminorm(fam3, np.array([0.0, 0.25, 0.25]), p), 2.0 * majorant_norm(H, p).total)
    with pytest.raises(ValueError):
        lipschitz_seminorm(fam[:1], np.array([0.0]), p)


def test_split_helpers():
    H = _sample()
    kept, dropped = H.restrict(K=1)
    assert kept.nnz + dropped.nnz == H.nnz
    assert np.all(np.abs(kept.k) <= 1)

    R, tail = taylor_truncate(H, 2)
    assert tail.nnz == 0 and R.nnz == H.nnz

    mv = mean_value(H)
    assert mv.nnz == 2  # y and z3 zbar3
    assert np.isclose(mv.coefficient((0,), (1,)), 0.5)
    assert resonant_part(H).nnz == H.nnz - 2


def test_evaluate_matches_hand_sum():
    H = TaylorHamiltonian.from_terms(
        1, 1, [(((1,), (0,), {1: 1}, {}), 1.0), (((-1,), (0,), {}, {1: 1}), 1.0)], K=1, D=1
    )
    th, z = 0.4, 0.3 + 0.2j
    expected = np.exp(1j * th) * z + np.exp(-1j * th) * np.conj(z)
    assert np.isclose(H.evaluate([th], [0.0], [z], [np.conj(z)]), expected)


def test_construction_rejects_keys_outside_caps():
    with pytest.raises(ValueError):
        TaylorHamiltonian.from_terms(1, 1, [(((0,), (2,), {}, {}), 1.0)], K=0, D=2)
    with pytest.raises(ValueError):
        TaylorHamiltonian.from_terms(1, 1, [(((3,), (0,), {}, {}), 1.0)], K=2, D=2)
    with pytest.raises(IndexError):
        TaylorHamiltonian.from_terms(1, 1, [(((0,), (0,), {2: 1}, {}), 1.0)], K=0, D=2)
    with pytest.raises(ValueError):
        NormParams(p=1.0)
