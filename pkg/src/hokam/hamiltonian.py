"""
Fourier-Taylor Hamiltonians

    H(theta, y, z, zbar) = sum  c_{k m q qb} e^{i k.theta} y^m z^q zbar^qb

stored sparsely as an integer exponent table plus complex coefficients.

Row layout of `exps` (n angles, J modes):
    [0, n)            k   Fourier index
    [n, 2n)           m   action exponents
    [2n, 2n+J)        q   z exponents
    [2n+J, 2n+2J)     qb  zbar exponents
Mode j (1-based) of z sits in column 2n + j - 1.

Rows are kept in canonical order (lexicographic on the row), duplicates merged.
The Poisson bracket is

    {A,B} = sum_i (dA/dtheta_i dB/dy_i - dA/dy_i dB/dtheta_i)
          + i sum_j (dA/dz_j dB/dzbar_j - dA/dzbar_j dB/dz_j),

so the induced flow is  f' = {f, H}  (z' = i dH/dzbar, theta' = dH/dy).
"""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence
import math
import numpy as np

# relative size under which a merged coefficient counts as cancellation noise
_PRUNE = 64 * np.finfo(float).eps


def _canonicalize(
    exps: np.ndarray, coeffs: np.ndarray, mass: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    if exps.shape[0] == 0:
        return exps.reshape(0, exps.shape[1]).astype(np.int64), np.zeros(0, dtype=complex)
    if mass is None:
        mass = np.abs(coeffs)
    order = np.lexsort(exps.T[::-1])
    e, c, w = exps[order], coeffs[order], mass[order]
    new = np.ones(e.shape[0], dtype=bool)
    new[1:] = np.any(e[1:] != e[:-1], axis=1)
    starts = np.flatnonzero(new)
    c = np.add.reduceat(c, starts)
    w = np.add.reduceat(w, starts)
    e = e[starts]
    keep = (c != 0) & (np.abs(c) > _PRUNE * w)
    return np.ascontiguousarray(e[keep]), c[keep]


@dataclass(frozen=True, eq=False)
class TaylorHamiltonian:
    n: int
    J: int
    K: int
    D: int
    exps: np.ndarray
    coeffs: np.ndarray
    discarded: float = field(default=0.0)

    def __post_init__(self):
        e = np.asarray(self.exps, dtype=np.int64).reshape(-1, 2 * self.n + 2 * self.J)
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if e.shape[0] != c.size:
            raise ValueError("exps and coeffs length mismatch")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Hamiltonian coefficient")
        object.__setattr__(self, "exps", e)
        object.__setattr__(self, "coeffs", c)
        if c.size:
            if np.any(e[:, self.n :] < 0):
                raise ValueError("negative monomial exponent")
            if np.max(self.weighted_degree) > self.D:
                raise ValueError(f"key exceeds weighted degree cap D={self.D}")
            if np.max(np.abs(e[:, : self.n])) > self.K:
                raise ValueError(f"key exceeds Fourier cutoff K={self.K}")

    # ---- construction ----

    @classmethod
    def zero(cls, n: int, J: int, K: int = 0, D: int = 2) -> "TaylorHamiltonian":
        return cls(n, J, K, D, np.zeros((0, 2 * n + 2 * J), dtype=np.int64), np.zeros(0))

    @classmethod
    def from_arrays(
        cls,
        n: int,
        J: int,
        exps: np.ndarray,
        coeffs: np.ndarray,
        *,
        K: int | None = None,
        D: int | None = None,
        discarded: float = 0.0,
        mass: np.ndarray | None = None,
    ) -> "TaylorHamiltonian":
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, 2 * n + 2 * J)
        coeffs = np.asarray(coeffs, dtype=complex).ravel()
        e, c = _canonicalize(exps, coeffs, mass)
        if K is None:
            K = int(np.max(np.abs(e[:, :n]))) if c.size else 0
        if D is None:
            D = int(np.max(_weighted(e, n, J))) if c.size else 2
        return cls(n, J, int(K), int(D), e, c, float(discarded))

    @classmethod
    def from_terms(
        cls,
        n: int,
        J: int,
        terms: Iterable[tuple[tuple, complex]],
        *,
        K: int | None = None,
        D: int | None = None,
    ) -> "TaylorHamiltonian":
        """
        terms: ((k, m, q, qb), c) with k, m length-n sequences and q, qb
        mappings {mode (1-based): exponent}.
        """
        rows, cs = [], []
        for key, c in terms:
            rows.append(make_row(n, J, *key))
            cs.append(c)
        return cls.from_arrays(n, J, np.array(rows).reshape(-1, 2 * n + 2 * J), np.array(cs), K=K, D=D)

    # ---- views ----

    @property
    def nnz(self) -> int:
        return int(self.coeffs.size)

    @property
    def k(self) -> np.ndarray:
        return self.exps[:, : self.n]

    @property
    def m(self) -> np.ndarray:
        return self.exps[:, self.n : 2 * self.n]

    @property
    def q(self) -> np.ndarray:
        return self.exps[:, 2 * self.n : 2 * self.n + self.J]

    @property
    def qb(self) -> np.ndarray:
        return self.exps[:, 2 * self.n + self.J :]

    @property
    def weighted_degree(self) -> np.ndarray:
        return _weighted(self.exps, self.n, self.J)

    @property
    def z_degree(self) -> np.ndarray:
        return self.exps[:, 2 * self.n :].sum(axis=1)

    def mass(self) -> float:
        """l1 mass of the coefficients (majorant at s=0, r=1, unit weights)."""
        return float(np.sum(np.abs(self.coeffs)))

    @cached_property
    def _index(self) -> dict[bytes, int]:
        return {row.tobytes(): i for i, row in enumerate(self.exps)}

    def coefficient(self, k, m, q=None, qb=None) -> complex:
        row = make_row(self.n, self.J, k, m, q or {}, qb or {})
        i = self._index.get(row.tobytes())
        return complex(self.coeffs[i]) if i is not None else 0j

    def items(self):
        for row, c in zip(self.exps, self.coeffs):
            yield split_row(row, self.n, self.J), complex(c)

    def __len__(self) -> int:
        return self.nnz

    # ---- arithmetic ----

    def _like(self, other: "TaylorHamiltonian") -> None:
        if (self.n, self.J) != (other.n, other.J):
            raise ValueError(f"dimension mismatch: (n,J)={(self.n, self.J)} vs {(other.n, other.J)}")

    def __add__(self, other: "TaylorHamiltonian") -> "TaylorHamiltonian":
        self._like(other)
        return TaylorHamiltonian.from_arrays(
            self.n,
            self.J,
            np.vstack([self.exps, other.exps]),
            np.concatenate([self.coeffs, other.coeffs]),
            K=max(self.K, other.K),
            D=max(self.D, other.D),
            discarded=self.discarded + other.discarded,
        )

    def __neg__(self) -> "TaylorHamiltonian":
        return TaylorHamiltonian(self.n, self.J, self.K, self.D, self.exps, -self.coeffs, self.discarded)

    def __sub__(self, other: "TaylorHamiltonian") -> "TaylorHamiltonian":
        return self + (-other)

    def scale(self, c: complex) -> "TaylorHamiltonian":
        if c == 0:
            return TaylorHamiltonian.zero(self.n, self.J, self.K, self.D)
        return TaylorHamiltonian(
            self.n, self.J, self.K, self.D, self.exps, self.coeffs * c, abs(c) * self.discarded
        )

    def __mul__(self, c: complex) -> "TaylorHamiltonian":
        return self.scale(c)

    __rmul__ = __mul__

    def select(self, mask: np.ndarray) -> "TaylorHamiltonian":
        return TaylorHamiltonian(self.n, self.J, self.K, self.D, self.exps[mask], self.coeffs[mask])

    def with_caps(self, *, K: int | None = None, D: int | None = None) -> "TaylorHamiltonian":
        """Relabel caps (keys must already satisfy them)."""
        return TaylorHamiltonian(
            self.n, self.J, self.K if K is None else K, self.D if D is None else D,
            self.exps, self.coeffs, self.discarded,
        )

    def restrict(
        self, *, K: int | None = None, D: int | None = None, z_cap: int | None = None
    ) -> tuple["TaylorHamiltonian", "TaylorHamiltonian"]:
        """(kept, dropped) split by Fourier cutoff, weighted degree and z-degree."""
        keep = np.ones(self.nnz, dtype=bool)
        if K is not None:
            keep &= np.max(np.abs(self.k), axis=1, initial=0) <= K
        if D is not None:
            keep &= self.weighted_degree <= D
        if z_cap is not None:
            keep &= self.z_degree <= z_cap
        kept = TaylorHamiltonian(
            self.n, self.J, self.K if K is None else min(self.K, K),
            self.D if D is None else min(self.D, D),
            self.exps[keep], self.coeffs[keep], self.discarded,
        )
        dropped = TaylorHamiltonian(self.n, self.J, self.K, self.D, self.exps[~keep], self.coeffs[~keep])
        return kept, dropped

    # ---- reality ----

    def conjugate(self) -> "TaylorHamiltonian":
        """Coefficients of the complex-conjugate function: (k,m,q,qb) -> (-k,m,qb,q)."""
        n, J = self.n, self.J
        e = self.exps.copy()
        e[:, :n] = -self.exps[:, :n]
        e[:, 2 * n : 2 * n + J] = self.qb
        e[:, 2 * n + J :] = self.q
        return TaylorHamiltonian.from_arrays(n, J, e, np.conj(self.coeffs), K=self.K, D=self.D)

    def reality_defect(self) -> float:
        d = self - self.conjugate()
        return d.mass() / max(self.mass(), np.finfo(float).tiny)

    def is_real(self, tol: float = 1e-12) -> bool:
        return self.reality_defect() <= tol

    # ---- evaluation ----

    def evaluate(self, theta, y, z, zbar) -> complex:
        """Value at one (possibly complex) phase-space point."""
        theta = np.asarray(theta, dtype=complex).reshape(self.n)
        y = np.asarray(y, dtype=complex).reshape(self.n)
        z = np.asarray(z, dtype=complex).reshape(self.J)
        zbar = np.asarray(zbar, dtype=complex).reshape(self.J)
        if self.nnz == 0:
            return 0j
        phase = np.exp(1j * (self.k @ theta))
        mono = (
            np.prod(y[None, :] ** self.m, axis=1)
            * np.prod(z[None, :] ** self.q, axis=1)
            * np.prod(zbar[None, :] ** self.qb, axis=1)
        )
        return complex(np.sum(self.coeffs * phase * mono))


# ---- row helpers ----


def _weighted(exps: np.ndarray, n: int, J: int) -> np.ndarray:
    return 2 * exps[:, n : 2 * n].sum(axis=1) + exps[:, 2 * n :].sum(axis=1)


def make_row(n: int, J: int, k, m, q: Mapping[int, int], qb: Mapping[int, int]) -> np.ndarray:
    row = np.zeros(2 * n + 2 * J, dtype=np.int64)
    row[:n] = np.asarray(k, dtype=np.int64).reshape(n)
    row[n : 2 * n] = np.asarray(m, dtype=np.int64).reshape(n)
    for j, e in dict(q).items():
        if not 1 <= j <= J:
            raise IndexError(f"mode index {j} outside 1..{J}")
        row[2 * n + j - 1] += e
    for j, e in dict(qb).items():
        if not 1 <= j <= J:
            raise IndexError(f"mode index {j} outside 1..{J}")
        row[2 * n + J + j - 1] += e
    return row


def split_row(row: np.ndarray, n: int, J: int) -> tuple:
    q = {int(j) + 1: int(row[2 * n + j]) for j in np.flatnonzero(row[2 * n : 2 * n + J])}
    qb = {int(j) + 1: int(row[2 * n + J + j]) for j in np.flatnonzero(row[2 * n + J :])}
    return tuple(int(v) for v in row[:n]), tuple(int(v) for v in row[n : 2 * n]), q, qb


def normal_form(omega: np.ndarray, Omega: np.ndarray, *, K: int = 0, D: int = 2) -> TaylorHamiltonian:
    """N = omega.y + sum_j Omega_j z_j zbar_j."""
    omega = np.asarray(omega, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    n, J = omega.size, Omega.size
    rows = np.zeros((n + J, 2 * n + 2 * J), dtype=np.int64)
    for i in range(n):
        rows[i, n + i] = 1
    for j in range(J):
        rows[n + j, 2 * n + j] = 1
        rows[n + j, 2 * n + J + j] = 1
    return TaylorHamiltonian.from_arrays(
        n, J, rows, np.concatenate([omega, Omega]).astype(complex), K=K, D=D
    )


# ---- bracket ----


def _pairing_blocks(
    A: TaylorHamiltonian,
    B: TaylorHamiltonian,
    fa: np.ndarray,
    fb: np.ndarray,
    dropA: int,
    dropB: int,
    wA: int,
    wB: int,
    factor: complex,
    cap: int,
    z_cap: int | None,
    zA: int,
    zB: int,
):
    """
    All products of A-rows with fa != 0 and B-rows with fb != 0 whose result
    respects the degree caps. dropA/dropB: column whose exponent the derivative
    lowers (-1 for theta derivatives); wA/wB, zA/zB: weighted- and z-degree lost.
    Returns (exps, coeffs, discarded mass).
    """
    ia = np.flatnonzero(fa)
    ib = np.flatnonzero(fb)
    if ia.size == 0 or ib.size == 0:
        return None, None, 0.0
    ca = A.coeffs[ia] * fa[ia]
    cb = B.coeffs[ib] * fb[ib]
    da = A.weighted_degree[ia] - wA
    db = B.weighted_degree[ib] - wB
    za = A.z_degree[ia] - zA
    zb = B.z_degree[ib] - zB

    keyA = da * 1024 + za
    keyB = db * 1024 + zb
    exps_out, coef_out = [], []
    lost = 0.0
    for ua in np.unique(keyA):
        selA = keyA == ua
        for ub in np.unique(keyB):
            selB = keyB == ub
            d = ua // 1024 + ub // 1024
            zz = ua % 1024 + ub % 1024
            if d > cap or (z_cap is not None and zz > z_cap):
                lost += float(np.sum(np.abs(ca[selA])) * np.sum(np.abs(cb[selB])))
                continue
            I = ia[selA]
            Jb = ib[selB]
            ii = np.repeat(np.arange(I.size), Jb.size)
            jj = np.tile(np.arange(Jb.size), I.size)
            e = A.exps[I][ii] + B.exps[Jb][jj]
            if dropA >= 0:
                e[:, dropA] -= 1
            if dropB >= 0:
                e[:, dropB] -= 1
            exps_out.append(e)
            coef_out.append(factor * ca[selA][ii] * cb[selB][jj])
    if not exps_out:
        return None, None, lost
    return np.vstack(exps_out), np.concatenate(coef_out), lost


def poisson_bracket(
    A: TaylorHamiltonian,
    B: TaylorHamiltonian,
    cap: int | None = None,
    *,
    K: int | None = None,
    z_cap: int | None = None,
) -> TaylorHamiltonian:
    """
    {A, B} computed exactly on coefficients. Terms of weighted degree > cap,
    z-degree > z_cap or |k|_inf > K (default: the larger operand cutoff) are
    dropped; their l1 mass is accumulated in `.discarded`.
    """
    A._like(B)
    n, J = A.n, A.J
    cap = max(A.D, B.D) if cap is None else int(cap)
    K = max(A.K, B.K) if K is None else int(K)
    width = 2 * n + 2 * J
    pieces_e, pieces_c = [], []
    lost = 0.0

    def add(res):
        nonlocal lost
        e, c, l = res
        lost += l
        if e is not None:
            pieces_e.append(e)
            pieces_c.append(c)

    for i in range(n):
        kA = A.k[:, i].astype(complex) * 1j
        kB = B.k[:, i].astype(complex) * 1j
        mA = A.m[:, i].astype(float)
        mB = B.m[:, i].astype(float)
        # dA/dtheta_i dB/dy_i
        add(_pairing_blocks(A, B, kA, mB, -1, n + i, 0, 2, 1.0, cap, z_cap, 0, 0))
        # - dA/dy_i dB/dtheta_i
        add(_pairing_blocks(A, B, mA, kB, n + i, -1, 2, 0, -1.0, cap, z_cap, 0, 0))
    for j in range(J):
        cz = 2 * n + j
        czb = 2 * n + J + j
        qA = A.exps[:, cz].astype(float)
        qbA = A.exps[:, czb].astype(float)
        qB = B.exps[:, cz].astype(float)
        qbB = B.exps[:, czb].astype(float)
        add(_pairing_blocks(A, B, qA, qbB, cz, czb, 1, 1, 1j, cap, z_cap, 1, 1))
        add(_pairing_blocks(A, B, qbA, qB, czb, cz, 1, 1, -1j, cap, z_cap, 1, 1))

    if not pieces_e:
        out = TaylorHamiltonian.zero(n, J, K, cap)
        return TaylorHamiltonian(n, J, K, cap, out.exps, out.coeffs, lost)
    e = np.vstack(pieces_e).reshape(-1, width)
    c = np.concatenate(pieces_c)
    inside = np.max(np.abs(e[:, :n]), axis=1) <= K
    lost += float(np.sum(np.abs(c[~inside])))
    e, c = e[inside], c[inside]
    return TaylorHamiltonian.from_arrays(n, J, e, c, K=K, D=cap, discarded=lost)


# ---- norms ----


@dataclass(frozen=True)
class NormParams:
    """
    Majorant domain: |Im theta| <= s, |y| <= r^2, |z_j| <= r / Psi(j).
    Psi(j) = j^{p/2} by default; a custom `weight` callable j -> Psi(j) may be supplied.
    """

    s: float = 0.1
    r: float = 1.0
    beta: float = 0.5
    p: float = 2.0
    weight: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        for name in ("s", "r", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"norm.{name} must be > 0")
        if self.weight is None and self.p < 2.0:
            raise ValueError("norm.p must be >= 2 so that Psi(j) >= j")

    def psi(self, J: int) -> np.ndarray:
        j = np.arange(1, J + 1, dtype=float)
        w = j ** (self.p / 2.0) if self.weight is None else np.asarray(self.weight(j), dtype=float)
        if np.any(w < j):
            raise ValueError("weight profile must satisfy Psi(j) >= j")
        return w


@dataclass(frozen=True)
class NormReport:
    sup_part: float
    y_deriv_part: float
    z_deriv_part: float
    zz_deriv_part: float
    zz_plus_part: float = 0.0
    vector_field: float = 0.0

    @property
    def total(self) -> float:
        return max(self.sup_part, self.y_deriv_part, self.z_deriv_part, self.zz_deriv_part)

    @property
    def smallness(self) -> float:
        """Majorant plus vector-field majorant: the quantity the iteration contracts."""
        return self.total + self.vector_field


def _base_weights(H: TaylorHamiltonian, p: NormParams) -> tuple[np.ndarray, np.ndarray]:
    psi = p.psi(H.J)
    zr = np.log(p.r / psi)
    ztot = np.hstack([H.q, H.qb]).astype(float)
    logb = (
        np.abs(H.k).sum(axis=1) * p.s
        + 2.0 * H.m.sum(axis=1) * math.log(p.r)
        + ztot @ np.concatenate([zr, zr])
    )
    return np.abs(H.coeffs) * np.exp(logb), psi


def majorant_norm(H: TaylorHamiltonian, p: NormParams) -> NormReport:
    """
    Coefficient-majorant upper bounds of the four defining conditions
    (|P|/r^2, |dP/dy_j|, j^beta |dP/dw_j| / r, (jl)^beta |d2P/dw_j dw_l|),
    with |e^{ik.theta}| <= e^{|k|_1 s}, |y_j| <= r^2, |z_j|, |zbar_j| <= r/Psi(j).
    """
    if H.nnz == 0:
        return NormReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    n, J, r = H.n, H.J, p.r
    base, psi = _base_weights(H, p)
    jb = np.arange(1, J + 1, dtype=float) ** p.beta

    sup = float(np.sum(base)) / r**2

    dy = (H.m.astype(float) * base[:, None]).sum(axis=0) / r**2
    y_part = float(np.max(dy)) if n else 0.0

    psi2 = np.concatenate([psi, psi])
    ztot = np.hstack([H.q, H.qb]).astype(float)
    dz = (ztot * base[:, None]).sum(axis=0) * psi2 / r  # |dP/dw_a| majorant
    jb2 = np.concatenate([jb, jb])
    z_part = float(np.max(jb2 * dz)) / r

    # second derivatives, accumulated on the (2J x 2J) variable grid
    zz = np.zeros((2 * J, 2 * J))
    rows = np.flatnonzero(H.z_degree >= 2)
    for i in rows:
        vars_ = np.flatnonzero(ztot[i])
        for a in vars_:
            for b in vars_:
                ea, eb = ztot[i, a], ztot[i, b]
                mult = ea * (ea - 1.0) if a == b else ea * eb
                if mult == 0:
                    continue
                zz[a, b] += mult * base[i] * psi2[a] * psi2[b] / r**2
    mode = np.concatenate([np.arange(1, J + 1), np.arange(1, J + 1)]).astype(float)
    w2 = np.outer(mode, mode) ** p.beta
    zz_part = float(np.max(w2 * zz))
    plus = float(np.max(w2 * (1.0 + np.abs(mode[:, None] - mode[None, :])) * zz))

    # |X_P|_r = |dP/dy| + |dP/dtheta| / r^2 + (||dP/dz||_Psi + ||dP/dzbar||_Psi) / r
    dth = float(np.sum(np.abs(H.k).sum(axis=1) * base)) / r**2
    vf = float(np.sum(dy)) + dth + (
        float(np.linalg.norm(psi * dz[:J])) + float(np.linalg.norm(psi * dz[J:]))
    ) / r
    return NormReport(sup, y_part, z_part, zz_part, plus, vf)


def lipschitz_seminorm(
    family: Sequence[TaylorHamiltonian], params: np.ndarray, p: NormParams
) -> float:
    """max_{a<b} <H_a - H_b> / |xi_a - xi_b| over a parameter grid (>= 2 points)."""
    params = np.asarray(params, dtype=float).reshape(len(family), -1)
    if len(family) < 2:
        raise ValueError("lipschitz_seminorm needs at least 2 grid points")
    best = 0.0
    for a in range(len(family)):
        for b in range(a + 1, len(family)):
            dist = float(np.linalg.norm(params[a] - params[b]))
            if dist == 0:
                continue
            best = max(best, majorant_norm(family[a] - family[b], p).total / dist)
    return best


# ---- truncation and mean value ----


def taylor_truncate(
    P: TaylorHamiltonian, degree: int = 2
) -> tuple[TaylorHamiltonian, TaylorHamiltonian]:
    """(R, tail) with R the keys of weighted degree <= degree."""
    low = P.weighted_degree <= degree
    R = TaylorHamiltonian(P.n, P.J, P.K, min(P.D, degree), P.exps[low], P.coeffs[low])
    tail = TaylorHamiltonian(P.n, P.J, P.K, P.D, P.exps[~low], P.coeffs[~low])
    return R, tail


def normal_mask(H: TaylorHamiltonian) -> np.ndarray:
    """k = 0, q = qb, |m| + |q| = 1: the y_j and z_j zbar_j keys."""
    k0 = ~np.any(H.k != 0, axis=1)
    diag = np.all(H.q == H.qb, axis=1)
    order1 = (H.m.sum(axis=1) + H.q.sum(axis=1)) == 1
    return k0 & diag & order1


def mean_value(R: TaylorHamiltonian) -> TaylorHamiltonian:
    """[R]: the normal-form part of a degree <= 2 Hamiltonian."""
    if R.nnz and np.max(R.weighted_degree) > 2:
        raise ValueError("mean_value expects weighted degree <= 2")
    return R.select(normal_mask(R))


def resonant_part(R: TaylorHamiltonian) -> TaylorHamiltonian:
    """R - [R] - constant: what the homological equation has to remove."""
    k0 = ~np.any(R.k != 0, axis=1)
    const = k0 & (R.weighted_degree == 0)
    return R.select(~(normal_mask(R) | const))


# ---- text format ----


def to_text(H: TaylorHamiltonian) -> str:
    """
    One record per key:  k1 .. kn | m1 .. mn | j:qj .. | j:qbj .. | re im
    Floats use repr, which round-trips exactly.
    """
    lines = [f"# n={H.n} J={H.J} K={H.K} D={H.D} nnz={H.nnz}"]
    for (k, m, q, qb), c in H.items():
        lines.append(
            " | ".join(
                [
                    " ".join(str(v) for v in k),
                    " ".join(str(v) for v in m),
                    " ".join(f"{j}:{e}" for j, e in sorted(q.items())),
                    " ".join(f"{j}:{e}" for j, e in sorted(qb.items())),
                    f"{c.real!r} {c.imag!r}",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def from_text(text: str) -> TaylorHamiltonian:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing coefficient dump header")
    hdr = dict(tok.split("=") for tok in lines[0][1:].split())
    n, J, K, D = (int(hdr[x]) for x in ("n", "J", "K", "D"))

    def _modes(field_: str) -> dict[int, int]:
        out: dict[int, int] = {}
        for tok in field_.split():
            j, e = tok.split(":")
            out[int(j)] = int(e)
        return out

    rows, cs = [], []
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split("|")]
        if len(parts) != 5:
            raise ValueError(f"malformed coefficient record: {ln!r}")
        k = [int(v) for v in parts[0].split()]
        m = [int(v) for v in parts[1].split()]
        re_, im_ = (float(v) for v in parts[4].split())
        rows.append(make_row(n, J, k, m, _modes(parts[2]), _modes(parts[3])))
        cs.append(complex(re_, im_))
    exps = np.array(rows, dtype=np.int64).reshape(-1, 2 * n + 2 * J)
    return TaylorHamiltonian(n, J, K, D, exps, np.array(cs, dtype=complex))
