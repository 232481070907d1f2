"""
Small divisors k.omega + l.Omega, non-resonance certification, the Diophantine
test on the internal frequencies and Monte-Carlo estimates of the excluded
parameter measure.

|k| in thresholds is the l1 norm; <l> = 1 + |sum_j j l_j|.
"""

from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence
import math
import numpy as np
import pandas as pd

from .backends import get_backend
from .fourier import kvectors
from .kernels import min_ratio_scan
from .rng import RngBundle
from .types import MeasureRow
from .utils.logging import get_logger

log = get_logger("hokam.divisors")


# ---- types ----


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """
    Internal frequencies omega (n) and normal frequencies Omega_j, j = 1..J.
    gap_slope / gap_defect describe Omega_j ~ Omega_J + gap_slope (j - J) +- gap_defect
    for modes beyond the stored truncation.
    """

    omega: np.ndarray
    Omega: np.ndarray
    gap_slope: float | None = None
    gap_defect: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omega, dtype=float)).copy()
        W = np.atleast_1d(np.asarray(self.Omega, dtype=float)).copy()
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(W))):
            raise ValueError("frequencies must be finite reals")
        w.flags.writeable = False
        W.flags.writeable = False
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "Omega", W)
        if self.gap_slope is None:
            slope = float(W[-1] - W[-2]) if W.size >= 2 else 2.0
            object.__setattr__(self, "gap_slope", slope)

    @property
    def n(self) -> int:
        return int(self.omega.size)

    @property
    def J(self) -> int:
        return int(self.Omega.size)

    def with_updates(self, d_omega: np.ndarray, d_Omega: np.ndarray) -> "FrequencySet":
        return replace(
            self,
            omega=self.omega + np.asarray(d_omega, dtype=float),
            Omega=self.Omega + np.asarray(d_Omega, dtype=float),
        )

    def extended(self, J_ext: int) -> tuple[np.ndarray, np.ndarray]:
        """Omega continued to J_ext modes by the gap law, plus per-mode uncertainty."""
        extra = max(0, int(J_ext) - self.J)
        tail = self.Omega[-1] + float(self.gap_slope) * np.arange(1, extra + 1)
        err = np.concatenate([np.zeros(self.J), np.full(extra, float(self.gap_defect))])
        return np.concatenate([self.Omega, tail]), err


@dataclass(frozen=True)
class DivisorIndex:
    k: tuple[int, ...]
    l: tuple[tuple[int, int], ...] = ()  # (1-based mode, coefficient) entries

    def __post_init__(self):
        merged: dict[int, int] = {}
        for j, c in self.l:
            if j < 1:
                raise ValueError(f"mode index {j} must be >= 1")
            merged[int(j)] = merged.get(int(j), 0) + int(c)
        l = tuple(sorted((j, c) for j, c in merged.items() if c != 0))
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        if sum(abs(c) for _, c in l) > 2:
            raise ValueError("|l| must be <= 2")
        if not l and not any(self.k):
            raise ValueError("(k, l) = 0 is not a divisor index")

    @property
    def bracket(self) -> int:
        return 1 + abs(sum(j * c for j, c in self.l))

    @property
    def l1(self) -> int:
        return sum(abs(v) for v in self.k)


@dataclass(frozen=True)
class ResonanceReport:
    passed: bool
    worst_index: DivisorIndex | None
    worst_value: float
    worst_threshold: float
    count_checked: int
    margin: float = math.inf  # min over checked keys of |divisor| / threshold-at-alpha-1
    b: int | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def worst(self) -> tuple[DivisorIndex | None, float, float]:
        return self.worst_index, self.worst_value, self.worst_threshold


# ---- single divisors ----


def divisor(idx: DivisorIndex, freqs: FrequencySet) -> float:
    if len(idx.k) != freqs.n:
        raise ValueError(f"k has length {len(idx.k)}, expected n={freqs.n}")
    terms = [kv * w for kv, w in zip(idx.k, freqs.omega)]
    for j, c in idx.l:
        if j > freqs.J:
            raise IndexError(f"mode index {j} outside 1..{freqs.J}")
        terms.append(c * freqs.Omega[j - 1])
    return math.fsum(terms)


def threshold(idx: DivisorIndex, alpha: float, tau: float) -> float:
    return alpha * idx.bracket / (1.0 + idx.l1**tau)


def _index_from_scan(k: np.ndarray, cls: int, p: int, q: int) -> DivisorIndex:
    if cls == 0:
        return DivisorIndex(tuple(k))
    if cls == 1:
        return DivisorIndex(tuple(k), ((p + 1, 1),))
    if cls == 2:
        return DivisorIndex(tuple(k), ((p + 1, 1), (q + 1, 1)))
    return DivisorIndex(tuple(k), ((p + 1, 1), (q + 1, -1)))


def _guard_modes(freqs: FrequencySet, K: int, J: int) -> int:
    """
    Extra modes beyond J needed before every |l| = 2 divisor exceeds its
    threshold by the gap law alone.
    """
    slope = float(freqs.gap_slope)
    if slope <= 0:
        return 0
    kmax = float(np.sum(np.abs(freqs.omega))) * K
    return int(math.ceil((kmax + 2.0 * freqs.gap_defect + 1.0) / slope)) + 2


# ---- certification ----


def _scan(
    freqs: FrequencySet,
    tau: float,
    K: int,
    J: int,
    lmin_fn: Callable[[np.ndarray], np.ndarray] | None = None,
):
    if J > freqs.J:
        raise IndexError(f"J={J} exceeds the stored {freqs.J} normal frequencies")
    kv = kvectors(freqs.n, int(K))
    # k.omega with compensated summation
    kw = np.array([math.fsum(row * freqs.omega) for row in kv])
    kden = 1.0 + np.abs(kv).sum(axis=1).astype(float) ** tau
    lmin = np.zeros(kv.shape[0]) if lmin_fn is None else lmin_fn(kv)
    sub = FrequencySet(freqs.omega, freqs.Omega[:J], freqs.gap_slope, freqs.gap_defect)
    Omega, err = sub.extended(J + _guard_modes(sub, K, J))
    r, i, c, p, q, count = min_ratio_scan(kw, kden, lmin, Omega, err)
    return kv, kw, kden, Omega, (r, i, c, p, q, count)


def _report(alpha: float, tau: float, freqs: FrequencySet, J: int, scan) -> ResonanceReport:
    kv, kw, kden, Omega, (r, i, c, p, q, count) = scan
    if i < 0:
        return ResonanceReport(True, None, math.inf, 0.0, count)
    idx = _index_from_scan(kv[i], c, p, q)
    value = kw[i] + sum(co * Omega[j - 1] for j, co in idx.l)
    thr = threshold(idx, alpha, tau)
    passed = bool(r >= alpha and r > 0.0)
    notes = []
    if any(j > J for j, _ in idx.l):
        notes.append(f"worst key uses modes beyond J={J} (gap-law guard)")
    return ResonanceReport(passed, idx, float(value), float(thr), count, margin=float(r), notes=notes)


def certify(freqs: FrequencySet, alpha: float, tau: float, K: int, J: int | None = None) -> ResonanceReport:
    """
    Check |k.omega + l.Omega| >= alpha <l> / (1 + |k|^tau) for |k|_inf <= K and
    |l| <= 2 supported in 1..J; modes beyond J via the gap law. The report's
    worst entry is the key with the smallest divisor/threshold ratio.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    J = freqs.J if J is None else int(J)
    rep = _report(alpha, tau, freqs, J, _scan(freqs, tau, K, J))
    log.debug(
        f"[certify] alpha={alpha:.3e} K={K} J={J} passed={rep.passed} "
        f"margin={rep.margin:.3e} checked={rep.count_checked}"
    )
    return rep


def diophantine(omega: Sequence[float], alpha: float, tau: float, K: int) -> ResonanceReport:
    """
    |k.omega - b| >= 2 pi alpha / |k|^{tau-1} for 0 < |k|_inf <= K and every b in Z;
    only the nearest integer can be the minimizer.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if K < 1:
        raise ValueError("K must be >= 1")
    kv = kvectors(omega.size, int(K))
    kv = kv[np.any(kv != 0, axis=1)]
    kw = np.array([math.fsum(row * omega) for row in kv])
    b = np.rint(kw)
    dist = np.abs(kw - b)
    l1 = np.abs(kv).sum(axis=1).astype(float)
    ratio = dist * l1 ** (tau - 1.0) / (2.0 * np.pi)
    i = int(np.argmin(ratio))
    thr = 2.0 * np.pi * alpha / l1[i] ** (tau - 1.0)
    passed = bool(ratio[i] >= alpha and ratio[i] > 0.0)
    return ResonanceReport(
        passed,
        DivisorIndex(tuple(kv[i])),
        float(kw[i] - b[i]),
        float(thr),
        int(kv.shape[0]),
        margin=float(ratio[i]),
        b=int(b[i]),
    )


def certify_via_diophantine(
    freqs: FrequencySet, alpha: float, tau: float, K: int, J: int | None = None
) -> ResonanceReport:
    """
    Reduced certification for integer normal frequencies: once omega passes the
    Diophantine test, every key with <l> <= 2 pi |k| is covered because l.Omega is
    an integer; only keys with <l> > 2 pi |k| are scanned explicitly.
    """
    if not np.array_equal(freqs.Omega, np.rint(freqs.Omega)):
        raise ValueError("certify_via_diophantine requires integer normal frequencies")
    J = freqs.J if J is None else int(J)
    dio = diophantine(freqs.omega, alpha, tau, K)
    if not dio.passed:
        return dio
    lmin = lambda kv: np.floor(2.0 * np.pi * np.abs(kv).sum(axis=1)) + 1.0  # noqa: E731
    rep = _report(alpha, tau, freqs, J, _scan(freqs, tau, K, J, lmin))
    return replace(rep, count_checked=rep.count_checked + dio.count_checked)


def gap_constant(Omega: Sequence[float]) -> float:
    """Largest m with |Omega_i - Omega_j| >= m |i - j| for all stored pairs."""
    W = np.asarray(Omega, dtype=float)
    if W.size < 2:
        return math.inf
    i = np.arange(W.size)
    d = np.abs(i[:, None] - i[None, :]).astype(float)
    gap = np.abs(W[:, None] - W[None, :])
    off = d > 0
    return float(np.min(gap[off] / d[off]))


# ---- Monte-Carlo measure ----


def sample_margins(
    box: Sequence[Sequence[float]],
    model: Callable[[np.ndarray, int], FrequencySet],
    *,
    tau: float,
    K: int,
    J: int,
    samples: int,
    seed: int,
    backend: str = "reference",
    threads: int = 0,
    show_progress: bool = False,
) -> np.ndarray:
    """
    Minimal divisor/threshold ratio (alpha factored out) per sampled omega.
    Sample i draws from its own RNG stream, so the result is independent of the
    backend and worker count.
    """
    lo, hi = np.asarray(box, dtype=float).reshape(-1, 2).T
    rngs = RngBundle(seed)

    def one(i: int) -> float:
        omega = rngs.for_sample(i).uniform(lo, hi)
        freqs = model(omega, J)
        return _scan(freqs, tau, K, J)[-1][0]

    out = get_backend(backend)(
        one, int(samples), threads=threads, show_progress=show_progress, desc="measure"
    )
    return np.asarray(out, dtype=float)


def excluded_fraction(margins: np.ndarray, alpha: float) -> float:
    m = np.asarray(margins, dtype=float)
    return float(np.mean((m < alpha) | (m == 0.0)))


def excluded_measure(
    box: Sequence[Sequence[float]],
    alpha: float,
    tau: float,
    K: int,
    J: int,
    model: Callable[[np.ndarray, int], FrequencySet],
    samples: int,
    seed: int,
    **kw,
) -> float:
    if samples < 100:
        raise ValueError("measure.samples must be >= 100")
    return excluded_fraction(
        sample_margins(box, model, tau=tau, K=K, J=J, samples=samples, seed=seed, **kw), alpha
    )


def measure_scan(
    box: Sequence[Sequence[float]],
    alphas: Sequence[float],
    tau: float,
    K: int,
    J: int,
    model: Callable[[np.ndarray, int], FrequencySet],
    samples: int,
    seed: int,
    **kw,
) -> pd.DataFrame:
    """Excluded fraction per alpha on one shared sample set."""
    if samples < 100:
        raise ValueError("measure.samples must be >= 100")
    margins = sample_margins(box, model, tau=tau, K=K, J=J, samples=samples, seed=seed, **kw)
    rows: list[MeasureRow] = [
        {
            "alpha": float(a),
            "fraction_excluded": excluded_fraction(margins, float(a)),
            "samples": int(samples),
            "seed": int(seed),
            "K": int(K),
            "J": int(J),
            "tau": float(tau),
        }
        for a in alphas
    ]
    return pd.DataFrame.from_records(rows)
