"""
Optional Numba-accelerated kernels with safe fallbacks.

Public API (stable):
- min_ratio_scan(kw, kden, lmin, Omega, Omega_err)

For every Fourier index k (with kw = k.omega, kden = 1 + |k|_1^tau) and every
l with |l| <= 2 the scan forms

    r(k, l) = |k.omega + l.Omega| * kden / <l>,     <l> = 1 + |sum j l_j|

and returns the minimum together with its location. A key fails the
non-resonance test at scale alpha iff r < alpha. Keys with <l> < lmin[k] are
skipped. Omega_err[j] is subtracted from |divisor| for every mode it touches
(used for extrapolated modes beyond the stored truncation).

l classes: 0 -> l = 0 (k != 0), 1 -> e_p, 2 -> e_p + e_q (p <= q),
3 -> e_p - e_q (p > q). Signs are covered by k -> -k.
"""

from __future__ import annotations
import numpy as np

try:
    import numba as nb  # type: ignore

    HAS_NUMBA = True
except Exception:  # pragma: no cover
    HAS_NUMBA = False


# --------- numpy fallback ---------


def _np_min_ratio_scan(kw, kden, lmin, Omega, err):
    Je = Omega.size
    modes = np.arange(1, Je + 1, dtype=float)
    sum_l = 1.0 + modes[:, None] + modes[None, :]
    dif_l = 1.0 + np.abs(modes[:, None] - modes[None, :])
    upper = np.triu(np.ones((Je, Je), dtype=bool))
    lower = np.tril(np.ones((Je, Je), dtype=bool), -1)
    O_sum = Omega[:, None] + Omega[None, :]
    O_dif = Omega[:, None] - Omega[None, :]
    E2 = err[:, None] + err[None, :]

    best = (np.inf, -1, -1, -1, -1)
    count = 0
    for i in range(kw.size):
        lo = lmin[i]
        if kden[i] > 1.0 and lo <= 1.0:
            r = abs(kw[i]) * kden[i]
            count += 1
            if r < best[0]:
                best = (r, i, 0, -1, -1)
        # e_p
        ok = (1.0 + modes) >= lo
        if np.any(ok):
            r = np.maximum(np.abs(kw[i] + Omega) - err, 0.0) * kden[i] / (1.0 + modes)
            r = np.where(ok, r, np.inf)
            count += int(ok.sum())
            j = int(np.argmin(r))
            if r[j] < best[0]:
                best = (float(r[j]), i, 1, j, -1)
        # e_p + e_q
        ok = upper & (sum_l >= lo)
        if np.any(ok):
            r = np.maximum(np.abs(kw[i] + O_sum) - E2, 0.0) * kden[i] / sum_l
            r = np.where(ok, r, np.inf)
            count += int(ok.sum())
            a, b = np.unravel_index(int(np.argmin(r)), r.shape)
            if r[a, b] < best[0]:
                best = (float(r[a, b]), i, 2, int(a), int(b))
        # e_p - e_q
        ok = lower & (dif_l >= lo)
        if np.any(ok):
            r = np.maximum(np.abs(kw[i] + O_dif) - E2, 0.0) * kden[i] / dif_l
            r = np.where(ok, r, np.inf)
            count += int(ok.sum())
            a, b = np.unravel_index(int(np.argmin(r)), r.shape)
            if r[a, b] < best[0]:
                best = (float(r[a, b]), i, 3, int(a), int(b))
    return best + (count,)


# --------- numba kernel ---------

if HAS_NUMBA:

    @nb.njit(cache=True)
    def _nb_min_ratio_scan(kw, kden, lmin, Omega, err):
        Je = Omega.shape[0]
        best = np.inf
        bi, bc, bp, bq = -1, -1, -1, -1
        count = 0
        for i in range(kw.shape[0]):
            lo = lmin[i]
            w = kw[i]
            d = kden[i]
            if d > 1.0 and lo <= 1.0:
                count += 1
                r = abs(w) * d
                if r < best:
                    best, bi, bc, bp, bq = r, i, 0, -1, -1
            for p in range(Je):
                lp = 2.0 + p
                if lp >= lo:
                    count += 1
                    v = abs(w + Omega[p]) - err[p]
                    r = max(v, 0.0) * d / lp
                    if r < best:
                        best, bi, bc, bp, bq = r, i, 1, p, -1
                for q in range(p, Je):
                    ll = 3.0 + p + q
                    if ll >= lo:
                        count += 1
                        v = abs(w + Omega[p] + Omega[q]) - err[p] - err[q]
                        r = max(v, 0.0) * d / ll
                        if r < best:
                            best, bi, bc, bp, bq = r, i, 2, p, q
                for q in range(p):
                    ll = 1.0 + (p - q)
                    if ll >= lo:
                        count += 1
                        v = abs(w + Omega[p] - Omega[q]) - err[p] - err[q]
                        r = max(v, 0.0) * d / ll
                        if r < best:
                            best, bi, bc, bp, bq = r, i, 3, p, q
        return best, bi, bc, bp, bq, count


def min_ratio_scan(
    kw: np.ndarray,
    kden: np.ndarray,
    lmin: np.ndarray,
    Omega: np.ndarray,
    Omega_err: np.ndarray,
) -> tuple[float, int, int, int, int, int]:
    """(r_min, k_index, l_class, p, q, count); p, q are 0-based mode indices or -1."""
    kw = np.ascontiguousarray(kw, dtype=float)
    kden = np.ascontiguousarray(kden, dtype=float)
    lmin = np.ascontiguousarray(lmin, dtype=float)
    Omega = np.ascontiguousarray(Omega, dtype=float)
    err = np.ascontiguousarray(Omega_err, dtype=float)
    if HAS_NUMBA:
        r, i, c, p, q, n = _nb_min_ratio_scan(kw, kden, lmin, Omega, err)
    else:
        r, i, c, p, q, n = _np_min_ratio_scan(kw, kden, lmin, Omega, err)
    return float(r), int(i), int(c), int(p), int(q), int(n)
