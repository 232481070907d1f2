from __future__ import annotations
import numpy as np
import pytest

from hokam.divisors import FrequencySet
from hokam.fourier import ThetaGrid
from hokam.hamiltonian import NormParams, TaylorHamiltonian, majorant_norm, normal_form, poisson_bracket
from hokam.homological import residual, solve
from hokam.lie import inverse_linear, symplectic_defect, time_one

GOLDEN = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0
SEEDS = [0, 1, 2, 3, 4]


def _random_real(rng: np.random.Generator, J: int = 3, K: int = 1, with_y: bool = True, scale: float = 1.0):
    """Random real Hamiltonian of weighted degree <= 2 with |k| <= K."""
    monos: list[tuple[tuple[int, ...], dict, dict]] = [((0,), {}, {})]
    if with_y:
        monos.append(((1,), {}, {}))
    for i in range(1, J + 1):
        monos.append(((0,), {i: 1}, {}))
        for j in range(1, J + 1):
            monos.append(((0,), {i: 1}, {j: 1}))
            if j >= i:
                monos.append(((0,), {i: 2} if i == j else {i: 1, j: 1}, {}))
    terms = []
    for k in range(-K, K + 1):
        for a, q, qb in monos:
            if a != (0,) and k != 0:
                continue
            c = complex(rng.normal(), rng.normal()) * scale
            terms.append((((k,), a, q, qb), c))
    A = TaylorHamiltonian.from_terms(1, J, terms, K=K, D=2)
    return 0.5 * (A + A.conjugate())


@pytest.mark.parametrize("seed", SEEDS)
def test_homological_equation_is_solved_exactly(seed):
    rng = np.random.default_rng(seed)
    R = _random_real(rng, J=3, K=3, scale=0.01)
    freqs = FrequencySet([GOLDEN], [1.0, 3.0, 5.0])
    sol = solve(R, freqs, alpha=0.01, tau=4.0)
    assert residual(sol, R, freqs).mass() <= 1e-12 * R.mass()
    assert sol.F.is_real()


@pytest.mark.parametrize("seed", SEEDS)
def test_time_one_map_is_symplectic(seed):
    rng = np.random.default_rng(100 + seed)
    F = _random_real(rng, J=2, K=1, with_y=False, scale=0.05)
    phi = time_one(F, ThetaGrid.for_cutoff(1, 1))
    assert symplectic_defect(phi) < 1e-11
    assert np.allclose(inverse_linear(phi.L) @ phi.L, np.eye(4), atol=1e-11)


@pytest.mark.parametrize("seed", SEEDS)
def test_bracket_is_real_and_antisymmetric(seed):
    rng = np.random.default_rng(200 + seed)
    A = _random_real(rng)
    B = _random_real(rng)
    AB = poisson_bracket(A, B, cap=4, K=2)
    BA = poisson_bracket(B, A, cap=4, K=2)
    assert AB.is_real()
    assert (AB + BA).mass() < 1e-12 * max(AB.mass(), 1.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_jacobi_identity(seed):
    rng = np.random.default_rng(300 + seed)
    A, B, C = (_random_real(rng, J=2) for _ in range(3))

    def br(X, Y):
        return poisson_bracket(X, Y, cap=4, K=3)

    total = br(A, br(B, C)) + br(B, br(C, A)) + br(C, br(A, B))
    assert total.mass() < 1e-10


def test_bracket_with_normal_form_preserves_support():
    rng = np.random.default_rng(7)
    A = _random_real(rng, J=3, K=2, with_y=False)
    N = normal_form(np.array([GOLDEN]), np.array([1.0, 3.0, 5.0]), K=2)
    AN = poisson_bracket(A, N)
    assert AN.nnz <= A.nnz
    assert AN.discarded == 0.0


@pytest.mark.parametrize("seed", SEEDS)
def test_majorant_dominates_values_on_the_domain(seed):
    rng = np.random.default_rng(500 + seed)
    J = 3
    H = _random_real(rng, J=J, K=2)
    p = NormParams(s=0.3, r=0.7)
    bound = p.r**2 * majorant_norm(H, p).sup_part
    radius = p.r / p.psi(J)

    def disc(size, rad):
        return rad * np.sqrt(rng.uniform(0.0, 1.0, size)) * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size))

    for _ in range(100):
        theta = rng.uniform(0.0, 2.0 * np.pi, 1) + 1j * rng.uniform(-p.s, p.s, 1)
        value = H.evaluate(theta, disc(1, p.r**2), disc(J, radius), disc(J, radius))
        assert abs(value) < bound
