"""
Time-one maps of degree-2 generators and composition of Hamiltonians with them.

A generator of weighted degree <= 2 splits on the angle grid as

    F(theta, y, Z) = b0(theta) + b1(theta).y + a(theta).Z + 1/2 Z.A(theta) Z,
    Z = (z_1..z_J, zbar_1..zbar_J).

Its flow (f' = {f, F}) is theta' = b1, Z' = Jc (a + A Z), y' = -dF/dtheta with
Jc = [[0, iI], [-iI, 0]]. The time-one map has the form

    theta -> theta_map(theta)
    Z     -> L(theta) Z + c(theta)
    y     -> G(theta) y + 1/2 Z.M_i(theta) Z + cross_i(theta).Z + off_i(theta)

and is stored per grid point. With b1 = 0 (angles frozen) everything follows
from matrix exponentials of the augmented generator acting on (Z, 1); the
y-shift uses the block-exponential integral identity
    int_0^1 e^{X^T s} E e^{X s} ds = F22^T F12,  [[F11, F12], [0, F22]] = expm([[-X^T, E], [0, X]]).
"""

from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Literal
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import ConvergenceError, SymplecticityError
from .fourier import ThetaGrid, evaluate_series, kvectors
from .hamiltonian import TaylorHamiltonian, poisson_bracket
from .utils.logging import get_logger

log = get_logger("hokam.lie")

_SYMPLECTIC_HARD = 1e-8
_PRUNE = 4 * np.finfo(float).eps


def structure_matrix(J: int) -> np.ndarray:
    I = np.eye(J)
    Z = np.zeros((J, J))
    return np.block([[Z, 1j * I], [-1j * I, Z]])


def _kindex(k: np.ndarray, K: int) -> np.ndarray:
    n = k.shape[1]
    w = (2 * K + 1) ** np.arange(n - 1, -1, -1)
    return (k + K) @ w


# ---- decomposition ----


@dataclass(frozen=True, eq=False)
class QuadraticGenerator:
    """Grid samples (leading axis: grid point) and Fourier coefficients of the parts."""

    grid: ThetaGrid
    n: int
    J: int
    K: int
    coeffs: dict  # name -> Fourier coefficients over kvectors(n, K)
    b0: np.ndarray  # (P,)
    b1: np.ndarray  # (P, n)
    a: np.ndarray  # (P, 2J)
    A: np.ndarray  # (P, 2J, 2J)
    db0: np.ndarray  # (P, n)
    db1: np.ndarray  # (P, n, n)   d b1_l / d theta_i at [i, l]
    da: np.ndarray  # (P, n, 2J)
    dA: np.ndarray  # (P, n, 2J, 2J)

    @property
    def theta_fixed(self) -> bool:
        return not np.any(self.b1 != 0)

    def at(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        """All parts and angle derivatives at one off-grid point."""
        kv = kvectors(self.n, self.K)
        ik = 1j * kv.astype(float)
        th = np.asarray(theta, dtype=float).reshape(1, self.n)
        out = {}
        for name, c in self.coeffs.items():
            out[name] = evaluate_series(kv, c, th)[0]
            dc = ik.reshape((-1, self.n) + (1,) * (c.ndim - 1)) * c[:, None]
            out["d" + name] = evaluate_series(kv, dc, th)[0]
        return out


def decompose(F: TaylorHamiltonian, grid: ThetaGrid) -> QuadraticGenerator:
    if F.nnz and np.max(F.weighted_degree) > 2:
        raise ValueError("decompose expects weighted degree <= 2")
    if grid.n != F.n:
        raise ValueError(f"grid has n={grid.n}, generator n={F.n}")
    n, J, K = F.n, F.J, F.K
    nk = (2 * K + 1) ** n
    c_b0 = np.zeros(nk, dtype=complex)
    c_b1 = np.zeros((nk, n), dtype=complex)
    c_a = np.zeros((nk, 2 * J), dtype=complex)
    c_A = np.zeros((nk, 2 * J, 2 * J), dtype=complex)

    idx = _kindex(F.k, K)
    m = F.m
    z = F.exps[:, 2 * n :]  # Z-index a sits at column a of this block
    zdeg = z.sum(axis=1)
    for r in range(F.nnz):
        c, i = F.coeffs[r], idx[r]
        if m[r].any():
            c_b1[i, int(np.argmax(m[r]))] += c
        elif zdeg[r] == 0:
            c_b0[i] += c
        elif zdeg[r] == 1:
            c_a[i, int(np.argmax(z[r]))] += c
        else:
            nz = np.flatnonzero(z[r])
            if nz.size == 1:
                c_A[i, nz[0], nz[0]] += 2.0 * c
            else:
                c_A[i, nz[0], nz[1]] += c
                c_A[i, nz[1], nz[0]] += c

    kv = kvectors(n, K).astype(float)
    coeffs = {"b0": c_b0, "b1": c_b1, "a": c_a, "A": c_A}
    vals, ders = {}, {}
    for name, c in coeffs.items():
        vals[name] = grid.to_values(c, K)
        tail = (1,) * (c.ndim - 1)
        d = np.stack([c * (1j * kv[:, i]).reshape((-1,) + tail) for i in range(n)], axis=1)
        ders[name] = grid.to_values(d, K)
    return QuadraticGenerator(
        grid=grid, n=n, J=J, K=K, coeffs=coeffs,
        b0=vals["b0"], b1=vals["b1"], a=vals["a"], A=vals["A"],
        db0=ders["b0"], db1=ders["b1"], da=ders["a"], dA=ders["A"],
    )


def assemble(
    grid: ThetaGrid,
    n: int,
    J: int,
    K: int,
    h0: np.ndarray,
    hy: np.ndarray,
    h1: np.ndarray,
    H2: np.ndarray,
    *,
    D: int = 2,
    prune: float = _PRUNE,
) -> tuple[TaylorHamiltonian, float]:
    """
    Grid samples of h0 + hy.y + h1.Z + 1/2 Z.H2 Z -> TaylorHamiltonian with
    |k|_inf <= K. Returns (H, tail) where tail is the l1 mass of the resolved
    Fourier shell K < |k|_inf <= grid.max_cutoff plus pruned noise.
    """
    Kc = grid.max_cutoff
    kv = kvectors(n, Kc)
    inside = np.max(np.abs(kv), axis=1) <= K
    iu, ju = np.triu_indices(2 * J)
    H2s = 0.5 * (H2 + np.swapaxes(H2, -1, -2))
    quad = H2s[:, iu, ju] * np.where(iu == ju, 0.5, 1.0)[None, :]

    parts = [
        grid.to_coefficients(h0, Kc)[:, None],
        grid.to_coefficients(hy, Kc),
        grid.to_coefficients(h1, Kc),
        grid.to_coefficients(quad, Kc),
    ]
    width = 2 * n + 2 * J
    templates = [np.zeros((1, width), dtype=np.int64)]
    ty = np.zeros((n, width), dtype=np.int64)
    ty[np.arange(n), n + np.arange(n)] = 1
    t1 = np.zeros((2 * J, width), dtype=np.int64)
    t1[np.arange(2 * J), 2 * n + np.arange(2 * J)] = 1
    t2 = np.zeros((iu.size, width), dtype=np.int64)
    np.add.at(t2, (np.arange(iu.size), 2 * n + iu), 1)
    np.add.at(t2, (np.arange(iu.size), 2 * n + ju), 1)
    templates += [ty, t1, t2]

    scale = max(float(np.max(np.abs(p))) if p.size else 0.0 for p in parts)
    cut = prune * scale
    rows, cs = [], []
    tail = 0.0
    for c, tpl in zip(parts, templates):
        mag = np.abs(c)
        tail += float(np.sum(mag[~inside]))
        keep = inside[:, None] & (mag > cut)
        tail += float(np.sum(mag[inside[:, None] & ~keep]))
        ki, ti = np.nonzero(keep)
        if ki.size == 0:
            continue
        e = tpl[ti].copy()
        e[:, :n] = kv[ki]
        rows.append(e)
        cs.append(c[ki, ti])
    if not rows:
        return TaylorHamiltonian.zero(n, J, K, D), tail
    H = TaylorHamiltonian.from_arrays(n, J, np.vstack(rows), np.concatenate(cs), K=K, D=D)
    return H, tail


# ---- maps ----


@dataclass(frozen=True, eq=False)
class SymplecticMap:
    grid: ThetaGrid
    n: int
    J: int
    L: np.ndarray  # (P, 2J, 2J)
    translation: np.ndarray  # (P, 2J)
    M: np.ndarray  # (P, n, 2J, 2J)
    y_cross: np.ndarray  # (P, n, 2J)
    y_offset: np.ndarray  # (P, n)
    y_linear: np.ndarray  # (P, n, n)
    theta_map: np.ndarray | None = None  # (P, n) image angles, None when frozen
    generator: TaylorHamiltonian | None = field(default=None)

    @property
    def theta_fixed(self) -> bool:
        return self.theta_map is None

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, p: int, y: np.ndarray, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Image of (theta_p, y, Z) for grid point p."""
        Z = np.asarray(Z, dtype=complex)
        y = np.asarray(y, dtype=complex)
        Zn = self.L[p] @ Z + self.translation[p]
        yn = (
            self.y_linear[p] @ y
            + 0.5 * np.einsum("a,iab,b->i", Z, self.M[p], Z)
            + self.y_cross[p] @ Z
            + self.y_offset[p]
        )
        th = self.grid.points[p] if self.theta_map is None else self.theta_map[p]
        return th, yn, Zn


def identity_map(grid: ThetaGrid, J: int) -> SymplecticMap:
    n, P, m = grid.n, grid.size, 2 * J
    return SymplecticMap(
        grid=grid, n=n, J=J,
        L=np.broadcast_to(np.eye(m, dtype=complex), (P, m, m)).copy(),
        translation=np.zeros((P, m), dtype=complex),
        M=np.zeros((P, n, m, m), dtype=complex),
        y_cross=np.zeros((P, n, m), dtype=complex),
        y_offset=np.zeros((P, n), dtype=complex),
        y_linear=np.broadcast_to(np.eye(n, dtype=complex), (P, n, n)).copy(),
    )


def _augmented(gen: QuadraticGenerator, Jc: np.ndarray, A: np.ndarray, a: np.ndarray) -> np.ndarray:
    P, m = A.shape[0], 2 * gen.J
    X = np.zeros((P, m + 1, m + 1), dtype=complex)
    X[:, :m, :m] = Jc @ A
    X[:, :m, m] = a @ Jc.T
    return X


def _forms(gen: QuadraticGenerator, dA: np.ndarray, da: np.ndarray, db0: np.ndarray) -> np.ndarray:
    """E_i = [[dA_i, da_i], [da_i^T, 2 db0_i]] per point and angle, (P, n, m+1, m+1)."""
    P, n, m = dA.shape[0], gen.n, 2 * gen.J
    E = np.zeros((P, n, m + 1, m + 1), dtype=complex)
    E[:, :, :m, :m] = dA
    E[:, :, :m, m] = da
    E[:, :, m, :m] = da
    E[:, :, m, m] = 2.0 * db0
    return E


def _split(Lt: np.ndarray, Mt: np.ndarray, m: int):
    Mt = 0.5 * (Mt + np.swapaxes(Mt, -1, -2))
    return (
        Lt[:, :m, :m],
        Lt[:, :m, m],
        Mt[:, :, :m, :m],
        Mt[:, :, :m, m],
        0.5 * Mt[:, :, m, m],
    )


def _exact(gen: QuadraticGenerator) -> SymplecticMap:
    m = 2 * gen.J
    Jc = structure_matrix(gen.J)
    X = _augmented(gen, Jc, gen.A, gen.a)
    E = _forms(gen, gen.dA, gen.da, gen.db0)
    P, s = X.shape[0], m + 1
    Lt = expm(X)
    Mt = np.zeros((P, gen.n, s, s), dtype=complex)
    XT = np.swapaxes(X, -1, -2)
    for i in range(gen.n):
        if not np.any(E[:, i]):
            continue
        C = np.zeros((P, 2 * s, 2 * s), dtype=complex)
        C[:, :s, :s] = -XT
        C[:, :s, s:] = E[:, i]
        C[:, s:, s:] = X
        B = expm(C)
        Mt[:, i] = -np.swapaxes(B[:, s:, s:], -1, -2) @ B[:, :s, s:]
    L, c, M, cross, off = _split(Lt, Mt, m)
    return SymplecticMap(
        grid=gen.grid, n=gen.n, J=gen.J, L=L, translation=c, M=M, y_cross=cross, y_offset=off,
        y_linear=np.broadcast_to(np.eye(gen.n, dtype=complex), (P, gen.n, gen.n)).copy(),
    )


def _ode_point(gen: QuadraticGenerator, theta0: np.ndarray, rtol: float, atol: float):
    n, m = gen.n, 2 * gen.J
    s = m + 1
    Jc = structure_matrix(gen.J)
    sizes = [n, s * s, n * n, n * n, n * s * s]
    cuts = np.cumsum(sizes)[:-1]

    def unpack(u):
        th, Lt, Ph, W, Q = np.split(u, cuts)
        return th, Lt.reshape(s, s), Ph.reshape(n, n), W.reshape(n, n), Q.reshape(n, s, s)

    def rhs(_t, u):
        th, Lt, Ph, W, Q = unpack(u)
        v = gen.at(th.real)
        X = _augmented(gen, Jc, v["A"][None], v["a"][None])[0]
        E = _forms(gen, v["dA"][None], v["da"][None], v["db0"][None])[0]
        B = -v["db1"]
        dQ = np.einsum("ri,ab,iac,cd->rbd", W, Lt, E, Lt, optimize=True)
        return np.concatenate([v["b1"], (X @ Lt).ravel(), (B @ Ph).ravel(), (-W @ B).ravel(), dQ.ravel()])

    u0 = np.concatenate([
        np.asarray(theta0, dtype=complex),
        np.eye(s, dtype=complex).ravel(),
        np.eye(n, dtype=complex).ravel(),
        np.eye(n, dtype=complex).ravel(),
        np.zeros(n * s * s, dtype=complex),
    ])
    sol = solve_ivp(rhs, (0.0, 1.0), u0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"time-one integration failed at theta={theta0}: {sol.message}")
    th, Lt, Ph, _W, Q = unpack(sol.y[:, -1])
    Mt = -np.einsum("ir,rab->iab", Ph, Q)
    return th.real, Lt, Ph, Mt


def _ode(gen: QuadraticGenerator, rtol: float = 1e-11, atol: float = 1e-13) -> SymplecticMap:
    P, n, m = gen.grid.size, gen.n, 2 * gen.J
    s = m + 1
    theta = np.empty((P, n))
    Lt = np.empty((P, s, s), dtype=complex)
    G = np.empty((P, n, n), dtype=complex)
    Mt = np.empty((P, n, s, s), dtype=complex)
    for p, th0 in enumerate(gen.grid.points):
        theta[p], Lt[p], G[p], Mt[p] = _ode_point(gen, th0, rtol, atol)
    L, c, M, cross, off = _split(Lt, Mt, m)
    return SymplecticMap(
        grid=gen.grid, n=n, J=gen.J, L=L, translation=c, M=M, y_cross=cross, y_offset=off,
        y_linear=G, theta_map=None if gen.theta_fixed else theta,
    )


def time_one_map(
    gen: QuadraticGenerator, mode: Literal["exact", "ode"] = "exact", *, check: bool = True
) -> SymplecticMap:
    if mode == "exact":
        if not gen.theta_fixed:
            raise ValueError("exact-quadratic mode requires b1 = 0 (use mode='ode')")
        phi = _exact(gen)
    elif mode == "ode":
        phi = _ode(gen)
    else:
        raise ValueError(f"unknown map mode: {mode!r}")
    if check:
        d = symplectic_defect(phi)
        if d > _SYMPLECTIC_HARD:
            raise SymplecticityError(f"symplecticity defect {d:.3e} exceeds {_SYMPLECTIC_HARD:.0e}")
    return phi


def symplectic_defect(phi: SymplecticMap) -> float:
    """max over grid points of |L^T Jc L - Jc|_max."""
    Jc = structure_matrix(phi.J)
    D = np.swapaxes(phi.L, -1, -2) @ Jc @ phi.L - Jc
    return float(np.max(np.abs(D))) if D.size else 0.0


def inverse_linear(L: np.ndarray) -> np.ndarray:
    """L^{-1} = Jc L^T Jc for symplectic L (Jc^2 = I)."""
    Jc = structure_matrix(L.shape[-1] // 2)
    return Jc @ np.swapaxes(L, -1, -2) @ Jc


def compose_maps(phi1: SymplecticMap, phi2: SymplecticMap) -> SymplecticMap:
    """phi1 o phi2 for maps with frozen angles on the same grid."""
    if not (phi1.theta_fixed and phi2.theta_fixed):
        raise ValueError("only maps with frozen angles compose on the grid")
    if phi1.grid != phi2.grid or phi1.J != phi2.J:
        raise ValueError("maps live on different grids")
    L2T = np.swapaxes(phi2.L, -1, -2)
    c2 = phi2.translation
    M1c2 = np.einsum("piab,pb->pia", phi1.M, c2)
    return SymplecticMap(
        grid=phi1.grid, n=phi1.n, J=phi1.J,
        L=phi1.L @ phi2.L,
        translation=np.einsum("pab,pb->pa", phi1.L, c2) + phi1.translation,
        M=phi2.M + L2T[:, None] @ phi1.M @ phi2.L[:, None],
        y_cross=phi2.y_cross + np.einsum("pba,pib->pia", phi2.L, phi1.y_cross + M1c2),
        y_offset=(
            phi1.y_offset + phi2.y_offset
            + np.einsum("pia,pa->pi", phi1.y_cross, c2)
            + 0.5 * np.einsum("pa,pia->pi", c2, M1c2)
        ),
        y_linear=phi1.y_linear @ phi2.y_linear,
    )


def map_distance(phi: SymplecticMap) -> float:
    """Largest grid-point size of (L - I, c, M, cross, offset)."""
    m = 2 * phi.J
    parts = [
        np.max(np.linalg.norm(phi.L - np.eye(m), ord=2, axis=(-2, -1)), initial=0.0),
        np.max(np.linalg.norm(phi.translation, axis=-1), initial=0.0),
        np.max(np.linalg.norm(phi.M, ord=2, axis=(-2, -1)), initial=0.0),
        np.max(np.abs(phi.y_cross), initial=0.0),
        np.max(np.abs(phi.y_offset), initial=0.0),
    ]
    return float(sum(parts))


def derivative_constant(phi: SymplecticMap, beta: float) -> float:
    """max (jl)^beta (1 + |j - l|) |(L - I)_{jl}| over grid points; j, l are mode numbers."""
    J = phi.J
    mode = np.concatenate([np.arange(1, J + 1), np.arange(1, J + 1)]).astype(float)
    w = np.outer(mode, mode) ** beta * (1.0 + np.abs(mode[:, None] - mode[None, :]))
    return float(np.max(w * np.abs(phi.L - np.eye(2 * J)))) if phi.L.size else 0.0


# ---- composition of Hamiltonians ----


def lie_series(
    H: TaylorHamiltonian,
    F: TaylorHamiltonian,
    cap: int,
    *,
    K: int | None = None,
    z_cap: int | None = None,
    tol: float = 1e-14,
    max_terms: int = 30,
) -> TaylorHamiltonian:
    """H o X_F^1 = sum_k ad_F^k H / k!, ad_F H = {H, F}."""
    out = H
    T = H
    for k in range(1, max_terms + 1):
        T = poisson_bracket(T, F, cap, K=K, z_cap=z_cap).scale(1.0 / k)
        out = out + T
        if T.mass() <= tol * max(out.mass(), np.finfo(float).tiny):
            return out
    raise ConvergenceError(f"Lie series did not converge in {max_terms} terms")


def compose(
    H: TaylorHamiltonian,
    phi: SymplecticMap,
    cap: int = 2,
    *,
    K: int | None = None,
    z_cap: int | None = None,
) -> tuple[TaylorHamiltonian, float]:
    """
    H o phi, truncated to |k|_inf <= K (default: the grid's resolved cutoff
    halved). Returns (H', tail mass). Quadratic H is substituted per grid point;
    higher degree uses the Lie series of the map's generator.
    """
    if (H.n, H.J) != (phi.n, phi.J):
        raise ValueError(f"dimension mismatch: H (n={H.n}, J={H.J}) vs map (n={phi.n}, J={phi.J})")
    grid = phi.grid
    K = grid.max_cutoff // 2 if K is None else int(K)
    if H.nnz == 0:
        return H.with_caps(K=K), 0.0
    if np.max(H.weighted_degree) > 2:
        if phi.generator is None:
            raise ValueError("composition beyond degree 2 needs the map's generator")
        out = lie_series(H, phi.generator, cap, K=K, z_cap=z_cap)
        return out, out.discarded

    if H.K > grid.max_cutoff:
        raise ValueError(f"grid too coarse: G={grid.G} cannot resolve K={H.K}")
    parts = decompose(H, grid)
    h0, hy, h1, H2 = parts.b0, parts.b1, parts.a, parts.A
    if not phi.theta_fixed:
        v = [evaluate_series(kvectors(H.n, H.K), parts.coeffs[name], phi.theta_map) for name in ("b0", "b1", "a", "A")]
        h0, hy, h1, H2 = v
    L, c = phi.L, phi.translation
    H2c = np.einsum("pab,pb->pa", H2, c)
    const = (
        h0
        + np.einsum("pi,pi->p", hy, phi.y_offset)
        + np.einsum("pa,pa->p", h1, c)
        + 0.5 * np.einsum("pa,pa->p", c, H2c)
    )
    lin = np.einsum("pi,pia->pa", hy, phi.y_cross) + np.einsum("pba,pb->pa", L, h1 + H2c)
    quad = np.einsum("pi,piab->pab", hy, phi.M) + np.swapaxes(L, -1, -2) @ H2 @ L
    ynew = np.einsum("pi,pil->pl", hy, phi.y_linear)
    out, tail = assemble(grid, H.n, H.J, K, const, ynew, lin, quad, D=max(cap, 2))
    return TaylorHamiltonian(
        out.n, out.J, out.K, out.D, out.exps, out.coeffs, out.discarded + H.discarded + tail
    ), tail


def time_one(
    F: TaylorHamiltonian, grid: ThetaGrid, mode: Literal["exact", "ode"] = "exact"
) -> SymplecticMap:
    """decompose + time_one_map, keeping F for Lie-series composition."""
    phi = time_one_map(decompose(F, grid), mode)
    return replace(phi, generator=F)
