from __future__ import annotations
import numpy as np
import pytest

from hokam.errors import ConvergenceError
from hokam.fourier import ThetaGrid
from hokam.hamiltonian import TaylorHamiltonian, normal_form
from hokam.lie import (
    compose,
    compose_maps,
    decompose,
    identity_map,
    inverse_linear,
    lie_series,
    map_distance,
    symplectic_defect,
    time_one,
    time_one_map,
)


def _real(terms, J: int = 2, K: int = 1) -> TaylorHamiltonian:
    A = TaylorHamiltonian.from_terms(1, J, terms, K=K, D=2)
    return 0.5 * (A + A.conjugate())


def _generator(scale: float = 1.0) -> TaylorHamiltonian:
    return _real(
        [
            (((1,), (0,), {1: 1}, {2: 1}), scale * (0.02 + 0.01j)),
            (((1,), (0,), {1: 2}, {}), scale * 0.015j),
            (((0,), (0,), {2: 1}, {}), scale * 0.01),
            (((-1,), (0,), {}, {}), scale * 0.03),
            (((0,), (0,), {1: 1}, {1: 1}), scale * 0.05),
        ]
    )


def test_zero_generator_is_identity():
    grid = ThetaGrid.for_cutoff(1, 1)
    phi = time_one(TaylorHamiltonian.zero(1, 2, K=1), grid)
    ident = identity_map(grid, 2)
    assert np.allclose(phi.L, ident.L)
    assert map_distance(phi) == 0.0


def test_diagonal_generator_rotates_phase():
    grid = ThetaGrid.for_cutoff(1, 1)
    a = 0.3
    F = TaylorHamiltonian.from_terms(1, 1, [(((0,), (0,), {1: 1}, {1: 1}), a)], K=0, D=2)
    phi = time_one(F, grid)
    assert np.allclose(phi.L[:, 0, 0], np.exp(1j * a))
    assert np.allclose(phi.L[:, 1, 1], np.exp(-1j * a))

    G = TaylorHamiltonian.from_terms(1, 1, [(((0,), (0,), {1: 1}, {1: 1}), 0.2)], K=0, D=2)
    both = compose_maps(phi, time_one(G, grid))
    assert np.allclose(both.L[:, 0, 0], np.exp(0.5j))


def test_exact_map_is_symplectic_and_invertible():
    grid = ThetaGrid.for_cutoff(1, 2)
    phi = time_one(_generator(), grid)
    assert symplectic_defect(phi) < 1e-12
    Linv = inverse_linear(phi.L)
    assert np.allclose(Linv @ phi.L, np.eye(4), atol=1e-12)


def test_exact_and_integrated_maps_agree():
    grid = ThetaGrid.for_cutoff(1, 1)
    gen = decompose(_generator(), grid)
    a = time_one_map(gen, "exact")
    b = time_one_map(gen, "ode")
    assert b.theta_fixed
    for name in ("L", "translation", "M", "y_cross", "y_offset"):
        assert np.allclose(getattr(a, name), getattr(b, name), atol=1e-8), name


def test_angle_moving_generator_needs_ode_mode():
    grid = ThetaGrid.for_cutoff(1, 1)
    F = _real([(((1,), (1,), {}, {}), 0.01)])
    with pytest.raises(ValueError):
        time_one_map(decompose(F, grid), "exact")
    with pytest.raises(ValueError):
        time_one_map(decompose(F, grid), "leapfrog")


def test_grid_composition_matches_lie_series():
    grid = ThetaGrid.for_cutoff(1, 2)
    F = _generator(0.1)
    H = normal_form(np.array([0.9]), np.array([1.0, 3.0]), K=0) + _generator(0.5)
    on_grid, tail = compose(H, time_one(F, grid), 2, K=2)
    series = lie_series(H, F, 2, K=2)
    assert (on_grid - series).mass() < 1e-9
    assert tail < 1e-6


def test_lie_series_term_cap():
    F = _generator(50.0)
    H = normal_form(np.array([0.9]), np.array([1.0, 3.0]), K=0)
    with pytest.raises(ConvergenceError):
        lie_series(H, F, 2, K=1, max_terms=3)
