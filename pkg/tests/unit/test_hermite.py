from __future__ import annotations
import numpy as np
import pytest

from hokam.errors import SpectralError
from hokam.hermite import (
    analyze,
    apply_oscillator,
    assemble_bilinear,
    build_basis,
    evaluate,
    hermite_functions,
    ladder_matrices,
    quadrature_rule,
    sup_norm_decay,
    synthesize,
)


def test_ground_state_and_parity():
    x = np.linspace(-3, 3, 7)
    h = hermite_functions(4, x)
    assert np.allclose(h[0], np.pi**-0.25 * np.exp(-0.5 * x * x))
    # h_j has parity (-1)^(j-1)
    assert np.allclose(h[1], -h[1][::-1])
    assert np.allclose(h[2], h[2][::-1])


def test_quadrature_orthonormality():
    basis = build_basis(24)
    G = (basis.values * basis.weights) @ basis.values.T
    assert np.allclose(G, np.eye(24), atol=1e-12)
    assert np.allclose(basis.nodes, -basis.nodes[::-1])


def test_large_abscissa_does_not_overflow():
    h = hermite_functions(400, np.array([0.0, 25.0, 60.0]))
    assert np.all(np.isfinite(h))
    assert np.max(np.abs(h[:, 2])) < 1e-100


def test_scaled_rule_integrates_quartic_products():
    basis = build_basis(8)
    x, w = quadrature_rule(basis, 2.0)
    h1 = hermite_functions(1, x)[0]
    assert np.isclose(np.sum(w * h1**4), 1.0 / np.sqrt(2.0 * np.pi), rtol=1e-13)


def test_bilinear_of_x_squared_matches_ladder():
    J = 12
    basis = build_basis(J)
    X, D = ladder_matrices(J)
    M = assemble_bilinear(basis, basis.nodes**2)
    assert np.allclose(M[: J - 1, : J - 1], (X @ X)[: J - 1, : J - 1], atol=1e-12)
    T = -D @ D + X @ X
    assert np.allclose(T[: J - 2, : J - 2], np.diag(2.0 * np.arange(1, J - 1) - 1.0), atol=1e-12)


def test_synthesize_analyze_and_oscillator():
    basis = build_basis(10)
    c = np.random.default_rng(0).standard_normal(10)
    assert np.allclose(analyze(basis, synthesize(basis, c)), c, atol=1e-12)
    assert np.allclose(apply_oscillator(basis, c), (2.0 * np.arange(1, 11) - 1.0) * c)
    x = np.array([0.3, -1.2])
    assert np.allclose(evaluate(basis, c, x), c @ hermite_functions(10, x))


def test_sup_norm_decay_is_mildly_negative():
    a = sup_norm_decay(40)
    assert -0.2 < a < 0.0


def test_invalid_requests_raise():
    with pytest.raises(SpectralError):
        build_basis(8, Q=10)
    with pytest.raises(SpectralError):
        hermite_functions(0, 0.0)
    with pytest.raises(SpectralError):
        quadrature_rule(build_basis(4), 0.0)
    with pytest.raises(SpectralError):
        assemble_bilinear(build_basis(4), np.ones(3))
