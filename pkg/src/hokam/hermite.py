"""
Hermite functions, Gauss-Hermite quadrature and operator assembly for the
harmonic oscillator T = -d^2/dx^2 + x^2.

Modes are 1-based everywhere: h_1 is the Gaussian ground state and
T h_j = (2j - 1) h_j. Row j-1 of every table holds mode j.

Quadrature weights are stored with the Gaussian factor removed
(w~_q = w_q exp(x_q^2)), so for any f decaying like a Gaussian

    int f dx  ~=  sum_q w~_q f(x_q),

exact whenever f is a product of two Hermite functions of total degree <= 2Q-1.
Products of 2c Hermite functions are integrated exactly by the rescaled rule
`quadrature_rule(basis, c)`.
"""

from __future__ import annotations
from dataclasses import dataclass
import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.stats import linregress

from .errors import SpectralError

_RESCALE = 1e150
_LOG_RESCALE = float(np.log(_RESCALE))
_MAX_MODES = 8192


def _scaled(v: np.ndarray, logscale: np.ndarray) -> np.ndarray:
    # v * exp(logscale) without underflowing the exponential first
    out = v * np.exp(np.maximum(logscale, -700.0))
    deep = logscale < -700.0
    if np.any(deep):
        out[deep] = np.sign(v[deep]) * np.exp(np.log(np.abs(v[deep])) + logscale[deep])
    return out


def hermite_functions(J: int, x: np.ndarray | float) -> np.ndarray:
    """
    Table h[j-1, i] = h_j(x_i), j = 1..J.

    Uses the normalized three-term recurrence on the polynomial part
    h_j(x) exp(x^2/2), rescaled on the fly with a per-point log scale so that
    neither the polynomial growth nor the Gaussian underflow is materialized.
    """
    if J < 1:
        raise SpectralError("J must be >= 1")
    if J > _MAX_MODES:
        raise SpectralError(f"J={J} exceeds the recurrence limit {_MAX_MODES}")
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if not np.all(np.isfinite(x)):
        raise SpectralError("non-finite abscissa passed to hermite_functions")

    out = np.empty((J, x.size))
    logscale = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, np.pi**-0.25)
    with np.errstate(divide="ignore", under="ignore"):
        out[0] = _scaled(cur, logscale)
        for j in range(1, J):
            nxt = np.sqrt(2.0 / j) * x * cur - np.sqrt((j - 1) / j) * prev
            prev, cur = cur, nxt
            big = np.abs(cur) > _RESCALE
            if np.any(big):
                cur[big] /= _RESCALE
                prev[big] /= _RESCALE
                logscale[big] += _LOG_RESCALE
            out[j] = _scaled(cur, logscale)
    if not np.all(np.isfinite(out)):
        raise SpectralError(f"Hermite recurrence overflowed at J={J}")
    return out


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    J: int
    Q: int
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray  # (J, Q) table of h_j(x_q)

    @property
    def eigenvalues(self) -> np.ndarray:
        return 2.0 * np.arange(1, self.J + 1) - 1.0

    def values_at(self, x: np.ndarray | float) -> np.ndarray:
        return hermite_functions(self.J, x)


def build_basis(J: int, Q: int | None = None) -> SpectralBasis:
    """
    Gauss-Hermite rule of order Q (default 4J) by Golub-Welsch, with the
    Gaussian-free weights recovered from the Christoffel function
    w~_q = 1 / sum_{n<=Q} h_n(x_q)^2.
    """
    J = int(J)
    Q = 4 * J if Q is None else int(Q)
    if J < 1:
        raise SpectralError("basis.J must be >= 1")
    if Q < 2 * J + 2:
        raise SpectralError(f"basis.Q must be >= 2J+2 = {2 * J + 2} (got {Q})")

    off = np.sqrt(np.arange(1, Q) / 2.0)
    x = eigh_tridiagonal(np.zeros(Q), off, eigvals_only=True)
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])  # exact symmetry about 0

    full = hermite_functions(Q, x)
    w = 1.0 / np.sum(full * full, axis=0)
    w = 0.5 * (w + w[::-1])
    if not (np.all(w > 0) and np.all(np.diff(x) > 0)):
        raise SpectralError("degenerate Gauss-Hermite rule")
    return SpectralBasis(J=J, Q=Q, nodes=x, weights=w, values=np.ascontiguousarray(full[:J]))


def quadrature_rule(basis: SpectralBasis, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """
    (nodes, weights) integrating exp(-scale x^2) * polynomial exactly,
    written for integrands given as products of 2*scale Hermite functions.
    """
    if scale <= 0:
        raise SpectralError("quadrature scale must be > 0")
    c = np.sqrt(float(scale))
    return basis.nodes / c, basis.weights / c


def _values_for(basis: SpectralBasis, scale: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if scale == 1.0:
        return basis.nodes, basis.weights, basis.values
    x, w = quadrature_rule(basis, scale)
    return x, w, hermite_functions(basis.J, x)


def assemble_bilinear(basis: SpectralBasis, v: np.ndarray, *, scale: float = 1.0) -> np.ndarray:
    """
    Matrix of int v h_j h_l dx.

    `v` is sampled at the nodes of `quadrature_rule(basis, scale)`; use
    scale=2 when v itself decays like exp(-x^2) times a polynomial.
    """
    x, w, H = _values_for(basis, scale)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise SpectralError(f"expected {x.size} samples, got shape {v.shape}")
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise SpectralError(f"non-finite potential sample at node index {int(bad[0])}")
    M = (H * (w * v)) @ H.T
    return 0.5 * (M + M.T)


def synthesize(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """Samples of sum_j c_j h_j at the basis nodes."""
    c = np.asarray(coeffs)
    if c.shape != (basis.J,):
        raise SpectralError(f"expected {basis.J} coefficients, got shape {c.shape}")
    return c @ basis.values


def analyze(basis: SpectralBasis, samples: np.ndarray) -> np.ndarray:
    """Adjoint of synthesize: c_j = sum_q w~_q h_j(x_q) f(x_q)."""
    f = np.asarray(samples)
    if f.shape != (basis.Q,):
        raise SpectralError(f"expected {basis.Q} samples, got shape {f.shape}")
    return basis.values @ (basis.weights * f)


def evaluate(basis: SpectralBasis, coeffs: np.ndarray, x: np.ndarray | float) -> np.ndarray:
    return np.asarray(coeffs) @ hermite_functions(basis.J, x)


# ---- coefficient-space operators ----


def ladder_matrices(J: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Position X and derivative D in the Hermite basis, truncated to J modes:
        x h_j  = sqrt(j/2) h_{j+1} + sqrt((j-1)/2) h_{j-1}
        h_j'   = sqrt((j-1)/2) h_{j-1} - sqrt(j/2) h_{j+1}
    Rows/columns of -D@D + X@X agree with diag(2j-1) except the last two.
    """
    s = np.sqrt(np.arange(1, J) / 2.0)
    X = np.diag(s, 1) + np.diag(s, -1)
    D = np.diag(s, 1) - np.diag(s, -1)
    return X, D


def apply_oscillator(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """T applied spectrally."""
    return basis.eigenvalues * np.asarray(coeffs)


def sup_norm_decay(J: int, j_min: int = 4, points: int = 4001) -> float:
    """
    Fitted exponent a in max_x |h_j(x)| ~ j^a over j in [j_min, J].
    Hermite asymptotics put it near -1/12.
    """
    if J <= j_min + 1:
        raise SpectralError("sup_norm_decay needs J > j_min + 1")
    edge = np.sqrt(2.0 * J + 1.0) + 4.0
    x = np.linspace(-edge, edge, points)
    sup = np.max(np.abs(hermite_functions(J, x)), axis=1)
    j = np.arange(1, J + 1)
    sel = j >= j_min
    return float(linregress(np.log(j[sel]), np.log(sup[sel])).slope)
