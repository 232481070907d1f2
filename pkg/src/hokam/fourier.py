"""
Uniform grids on the n-torus and the transforms between grid samples and
Fourier coefficients indexed by k in the box |k|_inf <= K.

Coefficient arrays are flat over the k-box in C order (see `kvectors`), with any
trailing axes carried along unchanged.
"""

from __future__ import annotations
from dataclasses import dataclass
from functools import cached_property
import itertools
import numpy as np
import scipy.fft as sfft


def kvectors(n: int, K: int) -> np.ndarray:
    """All k in [-K, K]^n, lexicographic, shape ((2K+1)^n, n)."""
    rng = range(-K, K + 1)
    return np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64).reshape(-1, n)


@dataclass(frozen=True)
class ThetaGrid:
    n: int
    G: int

    @classmethod
    def for_cutoff(cls, n: int, K: int, oversample: int = 2) -> "ThetaGrid":
        return cls(n=int(n), G=int(oversample) * (2 * int(K) + 1))

    @property
    def size(self) -> int:
        return self.G**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.G,) * self.n

    @property
    def max_cutoff(self) -> int:
        return (self.G - 1) // 2

    @cached_property
    def points(self) -> np.ndarray:
        """Grid angles, shape (G^n, n), C order over the n axes."""
        t = 2.0 * np.pi * np.arange(self.G) / self.G
        mesh = np.meshgrid(*([t] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def _check(self, K: int) -> None:
        if 2 * K + 1 > self.G:
            raise ValueError(f"grid too coarse: G={self.G} cannot resolve K={K}")

    def to_values(self, coeffs: np.ndarray, K: int) -> np.ndarray:
        """sum_k c_k exp(i k.theta) at every grid point; coeffs shape ((2K+1)^n, ...)."""
        self._check(K)
        coeffs = np.asarray(coeffs, dtype=complex)
        tail = coeffs.shape[1:]
        kv = kvectors(self.n, K) % self.G
        full = np.zeros(self.shape + tail, dtype=complex)
        full[tuple(kv.T)] = coeffs
        vals = sfft.ifftn(full, axes=tuple(range(self.n)), norm="forward")
        return vals.reshape((self.size,) + tail)

    def to_coefficients(self, values: np.ndarray, K: int) -> np.ndarray:
        """Inverse of `to_values` restricted to |k|_inf <= K."""
        self._check(K)
        values = np.asarray(values, dtype=complex)
        tail = values.shape[1:]
        full = sfft.fftn(values.reshape(self.shape + tail), axes=tuple(range(self.n)), norm="forward")
        kv = kvectors(self.n, K) % self.G
        return full[tuple(kv.T)]

    def spectral_derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """d/dtheta_axis of grid samples by trigonometric interpolation."""
        K = self.max_cutoff
        c = self.to_coefficients(values, K)
        k = kvectors(self.n, K)[:, axis].astype(float)
        c = c * (1j * k).reshape((-1,) + (1,) * (c.ndim - 1))
        return self.to_values(c, K)


def evaluate_series(kvecs: np.ndarray, coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Direct Fourier sum at arbitrary angles theta (P, n); coeffs (nk, ...)."""
    theta = np.atleast_2d(np.asarray(theta))
    phase = np.exp(1j * (theta @ kvecs.T))
    c = np.asarray(coeffs)
    return (phase @ c.reshape(c.shape[0], -1)).reshape((theta.shape[0],) + c.shape[1:])


def hermitize(coeffs: np.ndarray, kvecs: np.ndarray, *, transpose: bool = False) -> np.ndarray:
    """
    Impose c_{-k} = conj(c_k) (with a transpose of trailing matrix axes when
    requested) on coefficients of a real-valued function.
    """
    lookup = {tuple(k): i for i, k in enumerate(kvecs)}
    mirror = np.array([lookup[tuple(-k)] for k in kvecs])
    other = np.conj(coeffs[mirror])
    if transpose:
        other = np.swapaxes(other, -1, -2)
    return 0.5 * (coeffs + other)
