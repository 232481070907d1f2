from __future__ import annotations
import numpy as np
import pytest

from hokam.divisors import FrequencySet
from hokam.errors import NonRealFrequency, ResonantDivisor
from hokam.hamiltonian import NormParams, TaylorHamiltonian, majorant_norm
from hokam.homological import frequency_update, residual, solve, verify

GOLDEN = 2.0 * np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def _real(terms, J: int = 3, K: int = 3) -> TaylorHamiltonian:
    A = TaylorHamiltonian.from_terms(1, J, terms, K=K, D=2)
    return 0.5 * (A + A.conjugate())


def _perturbation() -> TaylorHamiltonian:
    return _real(
        [
            (((1,), (0,), {1: 1}, {2: 1}), 0.02 + 0.01j),
            (((2,), (0,), {1: 1}, {}), -0.03j),
            (((0,), (1,), {}, {}), 0.01),
            (((1,), (1,), {}, {}), 0.005),
            (((-3,), (0,), {2: 2}, {}), 0.004 - 0.002j),
            (((0,), (0,), {3: 1}, {3: 1}), 0.007),
            (((1,), (0,), {}, {}), 0.001),
            (((0,), (0,), {}, {}), 0.3),
        ]
    )


def test_solution_satisfies_equation():
    R = _perturbation()
    freqs = FrequencySet([GOLDEN], [1.0, 3.0, 5.0])
    sol = solve(R, freqs, alpha=0.01, tau=4.0)
    norm = NormParams(s=0.1, r=1.0)
    assert verify(sol, R, freqs, norm) <= 1e-12 * majorant_norm(R, norm).total
    assert residual(sol, R, freqs).mass() < 1e-14
    assert np.isclose(sol.constant, 0.3)
    assert sol.F.is_real()
    assert sol.N_hat.nnz == 2 and sol.min_divisor > 0.0


def test_frequency_update_reads_the_mean():
    R = _perturbation()
    sol = solve(R, FrequencySet([GOLDEN], [1.0, 3.0, 5.0]), alpha=0.01, tau=4.0)
    d_omega, d_Omega = frequency_update(sol.N_hat)
    assert np.allclose(d_omega, [0.01])
    assert np.allclose(d_Omega, [0.0, 0.0, 0.007])


def test_resonant_key_raises_or_is_skipped():
    R = _real([(((1,), (0,), {}, {1: 1}), 0.01), (((0,), (0,), {2: 1}, {}), 0.02)])
    freqs = FrequencySet([1.0], [1.0, 3.0, 5.0])
    with pytest.raises(ResonantDivisor) as ei:
        solve(R, freqs, alpha=0.01, tau=3.0)
    assert ei.value.value == 0.0

    sol = solve(R, freqs, alpha=0.01, tau=3.0, strict=False)
    assert len(sol.skipped) == 2
    assert sol.F.nnz == 2  # the z2 and zbar2 keys survive


def test_complex_mean_is_rejected():
    N_hat = TaylorHamiltonian.from_terms(1, 2, [(((0,), (1,), {}, {}), 0.1j)], K=0, D=2)
    with pytest.raises(NonRealFrequency):
        frequency_update(N_hat)


def test_degree_above_two_is_rejected():
    R = TaylorHamiltonian.from_terms(1, 1, [(((0,), (2,), {}, {}), 1.0)], K=0, D=4)
    with pytest.raises(ValueError):
        solve(R, FrequencySet([GOLDEN], [1.0]), alpha=0.01, tau=3.0)
