"""Cone arithmetic for the interior-point solver.

The cone K is a product of a nonnegative orthant, second-order cones and
PSD cones.  PSD blocks are carried in scaled vectorized form (svec): the
diagonal is stored as-is and off-diagonal entries are multiplied by sqrt(2),
so that the Euclidean inner product of two svecs equals trace(A @ B).

Scaling follows Nesterov-Todd: given strictly feasible (s, z) we compute a
block scaling W with W^{-T} s = W z = lambda.  For the orthant W is diagonal;
for a second-order cone W = eta * (2 v v' - J) with J = diag(1, -I) and v the
Jordan square root of the NT point; for a PSD block W acts by congruence with
a matrix R obtained from Cholesky factors of S and Z.

Second-order cones of equal dimension are processed as batches (consensus
programs carry one small cone per measurement, so the per-cone Python cost
would otherwise dominate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Dims:
    """Cone layout of the slack vector: l orthant rows, then SOC blocks, then
    PSD blocks (svec'd)."""

    l: int = 0
    q: tuple[int, ...] = ()
    s: tuple[int, ...] = ()

    @property
    def cone_dim(self) -> int:
        return self.l + sum(self.q) + sum(t * (t + 1) // 2 for t in self.s)

    @property
    def degree(self) -> int:
        """Barrier degree: one per orthant row, one per SOC, side per PSD."""
        return self.l + len(self.q) + sum(self.s)

    def soc_runs(self):
        """Maximal runs of equal-dimension SOC cones: (offset, dim, count)."""
        cached = _RUNS_CACHE.get((self.l, self.q))
        if cached is not None:
            return cached
        runs = []
        off = self.l
        i = 0
        while i < len(self.q):
            d = self.q[i]
            j = i
            while j < len(self.q) and self.q[j] == d:
                j += 1
            runs.append((off, d, j - i))
            off += d * (j - i)
            i = j
        _RUNS_CACHE[(self.l, self.q)] = runs
        return runs

    def psd_blocks(self):
        """PSD blocks: (offset, svec length, side)."""
        cached = _PSD_CACHE.get((self.l, self.q, self.s))
        if cached is not None:
            return cached
        out = []
        off = self.l + sum(self.q)
        for t in self.s:
            m = t * (t + 1) // 2
            out.append((off, m, t))
            off += m
        _PSD_CACHE[(self.l, self.q, self.s)] = out
        return out


_RUNS_CACHE: dict = {}
_PSD_CACHE: dict = {}


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _triu(t: int):
    got = _TRIU_CACHE.get(t)
    if got is None:
        rows, cols = np.triu_indices(t)
        scale = np.where(rows == cols, 1.0, SQRT2)
        got = (rows, cols, scale)
        _TRIU_CACHE[t] = got
    return got


def svec(M: np.ndarray) -> np.ndarray:
    t = M.shape[0]
    rows, cols, scale = _triu(t)
    return M[rows, cols] * scale


def smat(v: np.ndarray, t: int) -> np.ndarray:
    rows, cols, scale = _triu(t)
    M = np.zeros((t, t))
    w = v / scale
    M[rows, cols] = w
    M[cols, rows] = w
    return M


def identity(dims: Dims) -> np.ndarray:
    """The cone identity element e (ones / (1,0..) / svec(I))."""
    e = np.zeros(dims.cone_dim)
    e[: dims.l] = 1.0
    for off, d, cnt in dims.soc_runs():
        e[off:off + d * cnt:d] = 1.0
    for off, m, side in dims.psd_blocks():
        e[off:off + m] = svec(np.eye(side))
    return e


class Scaling:
    """Nesterov-Todd scaling for a strictly feasible pair (s, z)."""

    def __init__(self, dims: Dims):
        self.dims = dims
        self.lin_w: np.ndarray | None = None
        self.soc: list = []   # per run: (eta (cnt,), V (cnt, d))
        self.psd: list = []   # per block: (R, Rinv)
        self.lam: np.ndarray | None = None

    @staticmethod
    def compute(s: np.ndarray, z: np.ndarray, dims: Dims) -> "Scaling":
        sc = Scaling(dims)
        lam = np.zeros(dims.cone_dim)
        l = dims.l
        if l:
            sb, zb = s[:l], z[:l]
            if np.any(sb <= 0) or np.any(zb <= 0):
                raise np.linalg.LinAlgError("orthant iterate on boundary")
            sc.lin_w = np.sqrt(sb / zb)
            lam[:l] = np.sqrt(sb * zb)
        for off, d, cnt in dims.soc_runs():
            S = s[off:off + d * cnt].reshape(cnt, d)
            Z = z[off:off + d * cnt].reshape(cnt, d)
            res_s = S[:, 0] ** 2 - np.sum(S[:, 1:] ** 2, axis=1)
            res_z = Z[:, 0] ** 2 - np.sum(Z[:, 1:] ** 2, axis=1)
            if np.any(res_s <= 0) or np.any(res_z <= 0) or np.any(S[:, 0] <= 0) \
                    or np.any(Z[:, 0] <= 0):
                raise np.linalg.LinAlgError("SOC iterate on boundary")
            rs = np.sqrt(res_s)
            rz = np.sqrt(res_z)
            Sb = S / rs[:, None]
            Zb = Z / rz[:, None]
            gamma = np.sqrt((1.0 + np.sum(Sb * Zb, axis=1)) / 2.0)
            # NT point wbar, then its Jordan square root v (unit hyperbolic)
            Wb = np.empty_like(Sb)
            Wb[:, 0] = (Sb[:, 0] + Zb[:, 0]) / (2 * gamma)
            Wb[:, 1:] = (Sb[:, 1:] - Zb[:, 1:]) / (2 * gamma[:, None])
            V = Wb.copy()
            V[:, 0] += 1.0
            V /= np.sqrt(2.0 * (Wb[:, 0] + 1.0))[:, None]
            eta = np.sqrt(rs / rz)
            sc.soc.append((eta, V))
            lam[off:off + d * cnt] = (_h_batch(V, Z) * eta[:, None]).ravel()
        for off, m, side in dims.psd_blocks():
            S = smat(s[off:off + m], side)
            Z = smat(z[off:off + m], side)
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
            U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
            isq = 1.0 / np.sqrt(sig)
            R = Ls @ Vt.T @ np.diag(isq)
            Rinv = np.diag(isq) @ U.T @ Lz.T
            sc.psd.append((R, Rinv, sig))
            lam[off:off + m] = svec(np.diag(sig))
        sc.lam = lam
        return sc

    # --- linear operators -------------------------------------------------
    # W blockwise: orthant diag(w); SOC eta*(2 v v' - J) (symmetric);
    # PSD  W u = svec(R' mat(u) R),  W' u = svec(R mat(u) R'),
    #      W^{-1} u = svec(R^{-T} mat(u) R^{-1}),  W^{-T} u = svec(R^{-1} mat(u) R^{-T}).

    def apply(self, u: np.ndarray, trans: bool = False, inv: bool = False) -> np.ndarray:
        return self.apply_cols(u[:, None], trans=trans, inv=inv)[:, 0]

    def apply_cols(self, B: np.ndarray, trans: bool = False, inv: bool = False) -> np.ndarray:
        """Apply the scaling to every column of a (cone_dim, n) matrix."""
        out = np.empty_like(B)
        l = self.dims.l
        if l:
            w = self.lin_w[:, None]
            out[:l] = B[:l] / w if inv else B[:l] * w
        for run, (off, d, cnt) in zip(self.soc, self.dims.soc_runs()):
            eta, V = run
            U = B[off:off + d * cnt].reshape(cnt, d, -1)
            Vu = V if not inv else np.column_stack([V[:, 0], -V[:, 1:]])
            JU = U.copy()
            JU[:, 1:, :] = -JU[:, 1:, :]
            VtU = (Vu[:, None, :] @ U)  # (cnt, 1, n): per-cone inner products
            H = 2.0 * Vu[:, :, None] * VtU - JU
            f = eta if not inv else 1.0 / eta
            out[off:off + d * cnt] = (H * f[:, None, None]).reshape(d * cnt, -1)
        for blk, (off, m, side) in zip(self.psd, self.dims.psd_blocks()):
            R, Rinv, _ = blk
            rows, cols, scale = _triu(side)
            nb = B.shape[1]
            Ms = np.zeros((nb, side, side))
            W = (B[off:off + m] / scale[:, None]).T
            Ms[:, rows, cols] = W
            Ms[:, cols, rows] = W
            if not inv and not trans:
                res = R.T @ Ms @ R
            elif not inv and trans:
                res = R @ Ms @ R.T
            elif inv and not trans:
                res = Rinv.T @ Ms @ Rinv
            else:
                res = Rinv @ Ms @ Rinv.T
            out[off:off + m] = (res[:, rows, cols] * scale).T
        return out


def _h_batch(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    """(2 v v' - J) u rowwise for batched SOC vectors."""
    JU = U.copy()
    JU[:, 1:] = -JU[:, 1:]
    return 2.0 * V * np.sum(V * U, axis=1)[:, None] - JU


# --- Jordan algebra helpers (operate on the scaled point lambda) -----------

def jordan_prod(dims: Dims, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    l = dims.l
    out[:l] = u[:l] * v[:l]
    for off, d, cnt in dims.soc_runs():
        U = u[off:off + d * cnt].reshape(cnt, d)
        V = v[off:off + d * cnt].reshape(cnt, d)
        R = np.empty_like(U)
        R[:, 0] = np.sum(U * V, axis=1)
        R[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        out[off:off + d * cnt] = R.ravel()
    for off, m, side in dims.psd_blocks():
        U = smat(u[off:off + m], side)
        V = smat(v[off:off + m], side)
        out[off:off + m] = svec(0.5 * (U @ V + V @ U))
    return out


def jordan_solve(dims: Dims, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve lam o u = d per block."""
    out = np.empty_like(d)
    l = dims.l
    out[:l] = d[:l] / lam[:l]
    for off, dd, cnt in dims.soc_runs():
        L = lam[off:off + dd * cnt].reshape(cnt, dd)
        D = d[off:off + dd * cnt].reshape(cnt, dd)
        det = L[:, 0] ** 2 - np.sum(L[:, 1:] ** 2, axis=1)
        u0 = (L[:, 0] * D[:, 0] - np.sum(L[:, 1:] * D[:, 1:], axis=1)) / det
        U = np.empty_like(D)
        U[:, 0] = u0
        U[:, 1:] = (D[:, 1:] - u0[:, None] * L[:, 1:]) / L[:, :1]
        out[off:off + dd * cnt] = U.ravel()
    for off, m, side in dims.psd_blocks():
        L = smat(lam[off:off + m], side)
        evals = np.diag(L)  # NT-scaled lambda is diagonal
        D = smat(d[off:off + m], side)
        denom = 0.5 * (evals[:, None] + evals[None, :])
        out[off:off + m] = svec(D / denom)
    return out


def max_step(dims: Dims, u: np.ndarray, du: np.ndarray) -> float:
    """sup { a >= 0 : u + a*du in K } for u strictly interior (inf if unbounded)."""
    best = np.inf
    l = dims.l
    if l:
        neg = du[:l] < 0
        if np.any(neg):
            best = min(best, float(np.min(-u[:l][neg] / du[:l][neg])))
    for off, d, cnt in dims.soc_runs():
        U = u[off:off + d * cnt].reshape(cnt, d)
        D = du[off:off + d * cnt].reshape(cnt, d)
        a = D[:, 0] ** 2 - np.sum(D[:, 1:] ** 2, axis=1)
        b = 2.0 * (U[:, 0] * D[:, 0] - np.sum(U[:, 1:] * D[:, 1:], axis=1))
        c = U[:, 0] ** 2 - np.sum(U[:, 1:] ** 2, axis=1)
        # fast path: cones whose boundary is never crossed are skipped; the
        # exact quadratic-root logic runs only on the few active ones
        disc = b * b - 4.0 * a * c
        may_cross = (disc >= 0) & ((np.abs(a) >= 1e-300) | (b < 0)) | (D[:, 0] < 0)
        for i in np.nonzero(may_cross)[0]:
            best = min(best, _soc_quad_step(a[i], b[i], c[i], U[i, 0], D[i, 0]))
    for off, m, side in dims.psd_blocks():
        U = smat(u[off:off + m], side)
        D = smat(du[off:off + m], side)
        try:
            L = np.linalg.cholesky(U)
        except np.linalg.LinAlgError:
            eps = 1e-14 * (1.0 + float(np.trace(U)))
            L = np.linalg.cholesky(U + eps * np.eye(side))
        T = np.linalg.solve(L, np.linalg.solve(L, D).T)
        mval = float(np.min(np.linalg.eigvalsh(0.5 * (T + T.T))))
        if mval < 0:
            best = min(best, -1.0 / mval)
    return best


def _soc_quad_step(a: float, b: float, c: float, u0: float, d0: float) -> float:
    """Smallest positive boundary crossing of u + a*du for one SOC."""
    roots = []
    if abs(a) < 1e-300:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            sq = math.sqrt(disc)
            for r in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
                if r > 0:
                    roots.append(r)
    valid = [r for r in sorted(roots) if u0 + r * d0 >= -1e-12 * (abs(u0) + 1)]
    if valid:
        return valid[0]
    # no boundary crossing with nonneg head: cone left only via u0 < 0
    if d0 < 0:
        return -u0 / d0
    return np.inf


def min_eigs(dims: Dims, u: np.ndarray) -> float:
    """Smallest cone eigenvalue across blocks (membership check)."""
    worst = np.inf
    l = dims.l
    if l:
        worst = min(worst, float(np.min(u[:l])))
    for off, d, cnt in dims.soc_runs():
        U = u[off:off + d * cnt].reshape(cnt, d)
        worst = min(worst, float(np.min(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1))))
    for off, m, side in dims.psd_blocks():
        worst = min(worst, float(np.min(np.linalg.eigvalsh(smat(u[off:off + m], side)))))
    return worst
