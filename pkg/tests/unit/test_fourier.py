from __future__ import annotations
import numpy as np
import pytest

from hokam.fourier import ThetaGrid, evaluate_series, hermitize, kvectors


def test_kvectors_order():
    assert kvectors(1, 2).ravel().tolist() == [-2, -1, 0, 1, 2]
    kv = kvectors(2, 1)
    assert kv.shape == (9, 2)
    assert kv[0].tolist() == [-1, -1] and kv[4].tolist() == [0, 0]


def test_transform_pair_and_direct_sum():
    n, K = 2, 3
    grid = ThetaGrid.for_cutoff(n, K)
    rng = np.random.default_rng(1)
    c = rng.standard_normal((7**2, 2)) + 1j * rng.standard_normal((7**2, 2))
    vals = grid.to_values(c, K)
    assert vals.shape == (grid.size, 2)
    assert np.allclose(grid.to_coefficients(vals, K), c)
    direct = evaluate_series(kvectors(n, K), c, grid.points)
    assert np.allclose(direct, vals)


def test_spectral_derivative_of_sine():
    grid = ThetaGrid(n=1, G=16)
    th = grid.points[:, 0]
    d = grid.spectral_derivative(np.sin(3 * th), 0)
    assert np.allclose(d, 3 * np.cos(3 * th), atol=1e-12)


def test_hermitize_gives_real_values():
    K = 2
    kv = kvectors(1, K)
    rng = np.random.default_rng(2)
    c = hermitize(rng.standard_normal(5) + 1j * rng.standard_normal(5), kv)
    vals = ThetaGrid.for_cutoff(1, K).to_values(c, K)
    assert np.max(np.abs(vals.imag)) < 1e-14


def test_coarse_grid_rejected():
    with pytest.raises(ValueError):
        ThetaGrid(n=1, G=4).to_values(np.zeros(5), 2)
