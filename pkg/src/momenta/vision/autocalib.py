"""Camera autocalibration from fundamental matrices via simplified Kruppa
equations.

The unknown is the dual image of the absolute conic omega = K K^T,
parameterized by x in R^5 through

    omega(x) = [[x1, x2, x3],
                [x2, x4, x5],
                [x3, x5, 1 ]]        (omega symmetric, omega_33 = 1).

For a fundamental matrix with SVD F = U diag(r, s, 0) V^T, U = [u1|u2|u3],
V = [v1|v2|v3], the two simplified Kruppa polynomials are

    P1 = (r s v1' w v2)(u2' w u2) + (r^2 v1' w v1)(u1' w u2)
    P2 = (r s v1' w v2)(u1' w u1) + (s^2 v2' w v2)(u1' w u2)

each a product of forms affine in x, hence quadratic in x.  Both vanish at
the true omega; the pair is normalized jointly (stacked coefficient 2-norm
one) so a single threshold is commensurate across matrices.

Intrinsic priors (relative focal in [1, 10], aspect ratio, principal point
within a quarter of the image size from the center, near-zero skew) are
propagated into interval bounds on x by interval arithmetic, giving the box
used both as constraint set and to derive big-M constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..poly import Polynomial
from ..relax import Box, NonMinimalProblem, PsdPolyConstraint

NVARS = 5


# --------------------------------------------------------------------------
# interval arithmetic (for propagating intrinsic bounds into DIAC bounds)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")

    def __add__(self, other):
        other = _as_interval(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __mul__(self, other):
        other = _as_interval(other)
        prods = [self.lo * other.lo, self.lo * other.hi,
                 self.hi * other.lo, self.hi * other.hi]
        return Interval(min(prods), max(prods))

    __rmul__ = __mul__

    def sq(self) -> "Interval":
        if self.lo >= 0:
            return Interval(self.lo ** 2, self.hi ** 2)
        if self.hi <= 0:
            return Interval(self.hi ** 2, self.lo ** 2)
        return Interval(0.0, max(self.lo ** 2, self.hi ** 2))


def _as_interval(v) -> Interval:
    return v if isinstance(v, Interval) else Interval(float(v), float(v))


@dataclass
class IntrinsicBounds:
    """Priors on K in image-size-relative units (image size = 1)."""

    focal: tuple[float, float] = (1.0, 10.0)
    aspect: tuple[float, float] = (0.7, 1.25)
    pp_radius: float = 0.25
    skew: tuple[float, float] = (-0.01, 0.01)

    def diac_box(self) -> Box:
        fx = Interval(*self.focal)
        fy = fx * Interval(*self.aspect)
        u0 = Interval(0.5 - self.pp_radius, 0.5 + self.pp_radius)
        v0 = Interval(0.5 - self.pp_radius, 0.5 + self.pp_radius)
        sk = Interval(*self.skew)
        w11 = fx.sq() + sk.sq() + u0.sq()
        w12 = sk * fy + u0 * v0
        w13 = u0
        w22 = fy.sq() + v0.sq()
        w23 = v0
        cells = [w11, w12, w13, w22, w23]
        return Box([c.lo for c in cells], [c.hi for c in cells])


# --------------------------------------------------------------------------
# fundamental matrices and Kruppa polynomials
# --------------------------------------------------------------------------

@dataclass
class FundamentalInput:
    """Rank-2 fundamental matrix with cached SVD factors."""

    F: np.ndarray
    U: np.ndarray
    V: np.ndarray
    r: float
    s: float

    @staticmethod
    def from_matrix(F) -> "FundamentalInput":
        F = np.asarray(F, dtype=float)
        if F.shape != (3, 3):
            raise ValueError("fundamental matrix must be 3x3")
        U, sig, Vt = np.linalg.svd(F)
        if sig[2] > 1e-8 * sig[0]:
            raise ValueError(
                f"matrix is not rank-2 (third singular value {sig[2]:.2e})")
        if sig[1] <= 0:
            raise ValueError("degenerate fundamental matrix (rank < 2)")
        return FundamentalInput(F, U, Vt.T, float(sig[0]), float(sig[1]))


def _conic_form(a: np.ndarray, b: np.ndarray) -> Polynomial:
    """a' omega(x) b as an affine polynomial in x."""
    terms = {
        (1, 0, 0, 0, 0): a[0] * b[0],
        (0, 1, 0, 0, 0): a[0] * b[1] + a[1] * b[0],
        (0, 0, 1, 0, 0): a[0] * b[2] + a[2] * b[0],
        (0, 0, 0, 1, 0): a[1] * b[1],
        (0, 0, 0, 0, 1): a[1] * b[2] + a[2] * b[1],
        (0, 0, 0, 0, 0): a[2] * b[2],
    }
    return Polynomial(NVARS, terms)


def kruppa_polys(F: FundamentalInput) -> tuple[Polynomial, Polynomial]:
    """The two simplified Kruppa polynomials, jointly normalized.

    Each is a product of two affine-in-x conic forms, so quadratic in x;
    the pair is scaled by the 2-norm of the stacked coefficient vector so
    one threshold applies to both.
    """
    u1, u2 = F.U[:, 0], F.U[:, 1]
    v1, v2 = F.V[:, 0], F.V[:, 1]
    r, s = F.r, F.s
    v1wv2 = _conic_form(v1, v2)
    v1wv1 = _conic_form(v1, v1)
    v2wv2 = _conic_form(v2, v2)
    u1wu1 = _conic_form(u1, u1)
    u2wu2 = _conic_form(u2, u2)
    u1wu2 = _conic_form(u1, u2)
    P1 = (v1wv2 * u2wu2) * (r * s) + (v1wv1 * u1wu2) * (r * r)
    P2 = (v1wv2 * u1wu1) * (r * s) + (v2wv2 * u1wu2) * (s * s)
    joint = math.hypot(P1.coefficient_norm(), P2.coefficient_norm())
    if joint == 0.0:
        raise ValueError("degenerate Kruppa pair (zero polynomials)")
    return P1 * (1.0 / joint), P2 * (1.0 / joint)


@dataclass
class Diac:
    """DIAC parameter vector x in R^5 (omega_33 = 1 implied)."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (NVARS,):
            raise ValueError("DIAC parameter must be a 5-vector")
        w = self.omega()
        lam = np.linalg.eigvalsh(w)
        if lam[0] < -1e-8 * (1.0 + float(np.linalg.norm(w))):
            raise ValueError(f"omega has eigenvalue {lam[0]:.2e}; not PSD within tolerance")

    def omega(self) -> np.ndarray:
        x1, x2, x3, x4, x5 = self.x
        return np.array([[x1, x2, x3], [x2, x4, x5], [x3, x5, 1.0]])

    @staticmethod
    def from_omega(w: np.ndarray) -> "Diac":
        w = np.asarray(w, dtype=float)
        w = w / w[2, 2]
        return Diac(np.array([w[0, 0], w[0, 1], w[0, 2], w[1, 1], w[1, 2]]))


def omega_psd_constraint() -> PsdPolyConstraint:
    """omega(x) >= 0 as a matrix of affine polynomials."""
    e = np.eye(3)
    cells = [[_conic_form(e[:, i], e[:, j]) for j in range(3)] for i in range(3)]
    return PsdPolyConstraint(cells)


def autocalib_problem(Fs, bounds: IntrinsicBounds | None = None,
                      norm: str = "l2") -> NonMinimalProblem:
    """Non-minimal DIAC estimation from >= 3 fundamental matrices."""
    Fs = [f if isinstance(f, FundamentalInput) else FundamentalInput.from_matrix(f)
          for f in Fs]
    if len(Fs) < 3:
        raise ValueError("autocalibration needs at least 3 fundamental matrices "
                         "(5 unknowns, 2 equations each)")
    bounds = bounds or IntrinsicBounds()
    groups = [list(kruppa_polys(F)) for F in Fs]
    return NonMinimalProblem(
        nvars=NVARS,
        groups=groups,
        norm=norm,
        order=0,
        psd_constraints=[omega_psd_constraint()],
        box=bounds.diac_box(),
    )


def autocalib_consensus_problem(Fs, eps: float,
                                bounds: IntrinsicBounds | None = None,
                                node_limit: int = 100000,
                                time_limit: float | None = None):
    """Consensus maximization over fundamental matrices: a matrix is an
    inlier when both of its normalized Kruppa residuals are within eps."""
    from ..consensus import ConsensusProblem
    Fs = [f if isinstance(f, FundamentalInput) else FundamentalInput.from_matrix(f)
          for f in Fs]
    bounds = bounds or IntrinsicBounds()
    groups = [list(kruppa_polys(F)) for F in Fs]
    return ConsensusProblem(
        nvars=NVARS,
        groups=groups,
        eps=eps,
        group_norm="max",
        order=0,
        psd_constraints=[omega_psd_constraint()],
        box=bounds.diac_box(),
        node_limit=node_limit,
        time_limit=time_limit,
    )


# --------------------------------------------------------------------------
# intrinsics recovery
# --------------------------------------------------------------------------

@dataclass
class KRecovery:
    K: np.ndarray
    skew: float
    clipped: bool


def recover_K(omega, tol: float = 1e-6) -> KRecovery:
    """Upper-triangular K with K_33 = 1 from omega = K K^T.

    Slightly indefinite omega (eigenvalues above -1e-6 after normalization)
    is projected onto the PSD cone before factoring and flagged ``clipped``;
    larger negative eigenvalues are irrecoverable and raise.
    """
    if isinstance(omega, Diac):
        w = omega.omega()
    else:
        w = np.asarray(omega, dtype=float)
        if w.shape == (NVARS,):
            w = Diac(w).omega()
    w = 0.5 * (w + w.T)
    w = w / w[2, 2]
    scale = 1.0 + float(np.linalg.norm(w))
    lam, Q = np.linalg.eigh(w)
    clipped = False
    if lam[0] < -tol * scale:
        raise ValueError(
            f"omega eigenvalue {lam[0]:.3e} below -{tol:g}; irrecoverably indefinite")
    if lam[0] < 0:
        lam = np.maximum(lam, 0.0)
        w = Q @ np.diag(lam) @ Q.T
        w = w / w[2, 2]
        clipped = True
    # reverse/UL Cholesky: flip, factor, flip back gives upper-triangular K
    Jp = np.eye(3)[::-1]
    wf = Jp @ w @ Jp
    jitter = 0.0
    for _ in range(8):
        try:
            L = np.linalg.cholesky(wf + jitter * np.eye(3))
            break
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * scale)
            clipped = True
    else:
        raise ValueError("omega could not be factored even after clipping")
    K = Jp @ L @ Jp
    K = K / K[2, 2]
    return KRecovery(K=K, skew=float(K[0, 1]), clipped=clipped)


def calibration_errors(K_est: np.ndarray, K_true: np.ndarray) -> dict:
    """Relative focal, principal-point and skew errors (image-size units)."""
    df = max(abs(K_est[0, 0] - K_true[0, 0]) / abs(K_true[0, 0]),
             abs(K_est[1, 1] - K_true[1, 1]) / abs(K_true[1, 1]))
    duv = float(np.hypot(K_est[0, 2] - K_true[0, 2], K_est[1, 2] - K_true[1, 2]))
    ds = abs(K_est[0, 1] - K_true[0, 1])
    return {"df": float(df), "duv": duv, "ds": float(ds)}


# --------------------------------------------------------------------------
# synthetic generator
# --------------------------------------------------------------------------

def _skew3(t: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def _random_rotation(rng) -> np.ndarray:
    from .rigid import quat_to_rot
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_rot(q)


def _random_K(rng, bounds: IntrinsicBounds) -> np.ndarray:
    fx = rng.uniform(*bounds.focal)
    fy = fx * rng.uniform(*bounds.aspect)
    # keep a margin inside the pp disc so boxes never clip the truth
    ang = rng.uniform(0, 2 * np.pi)
    rad = rng.uniform(0, 0.8 * bounds.pp_radius)
    u0, v0 = 0.5 + rad * np.cos(ang), 0.5 + rad * np.sin(ang)
    sk = rng.uniform(bounds.skew[0], bounds.skew[1]) * 0.5
    return np.array([[fx, sk, u0], [0.0, fy, v0], [0.0, 0.0, 1.0]])


@dataclass
class AutocalibGroundTruth:
    K: np.ndarray
    omega: np.ndarray         # 5-vector DIAC parameters
    inlier_mask: np.ndarray

    def to_json(self):
        return {"K": self.K.tolist(), "omega": self.omega.tolist(),
                "inlier_mask": [bool(b) for b in self.inlier_mask]}


def synth_fundamentals(nviews: int, K: np.ndarray | None = None,
                       outlier_count: int = 0, seed: int = 0,
                       bounds: IntrinsicBounds | None = None,
                       min_outlier_residual: float = 1e-2,
                       ) -> tuple[list[FundamentalInput], AutocalibGroundTruth]:
    """Deterministic synthetic fundamental matrices with a shared K.

    ``nviews`` matrices total; ``outlier_count`` of them are generated from a
    per-matrix random K (planted outliers).  Seeds whose outlier residuals
    at the true DIAC fall below ``min_outlier_residual`` after normalization
    are rejected and resampled, so planted instances are separable.
    """
    if nviews < 2:
        raise ValueError("need at least two views")
    if outlier_count >= nviews:
        raise ValueError("outlier_count must be smaller than nviews")
    bounds = bounds or IntrinsicBounds()
    rng = np.random.default_rng(seed)
    if K is None:
        K = _random_K(rng, bounds)
    K = np.asarray(K, dtype=float)
    x_true = Diac.from_omega(K @ K.T).x

    def make_F(Kmat) -> FundamentalInput:
        while True:
            R = _random_rotation(rng)
            t = rng.uniform(-1.0, 1.0, 3)
            if np.linalg.norm(t) < 0.3:
                continue
            Kinv = np.linalg.inv(Kmat)
            F = Kinv.T @ _skew3(t) @ R @ Kinv
            F = F / np.linalg.norm(F)
            fi = FundamentalInput.from_matrix(F)
            if fi.s / fi.r > 1e-6:
                return fi

    mask = np.ones(nviews, dtype=bool)
    if outlier_count:
        out_idx = rng.choice(nviews, size=outlier_count, replace=False)
        mask[out_idx] = False

    Fs: list[FundamentalInput] = []
    for i in range(nviews):
        for _attempt in range(64):
            if mask[i]:
                fi = make_F(K)
                p1, p2 = kruppa_polys(fi)
                if max(abs(p1(x_true)), abs(p2(x_true))) < 1e-9:
                    Fs.append(fi)
                    break
            else:
                K_out = _random_K(rng, bounds)
                fi = make_F(K_out)
                p1, p2 = kruppa_polys(fi)
                if max(abs(p1(x_true)), abs(p2(x_true))) >= min_outlier_residual:
                    Fs.append(fi)
                    break
        else:
            raise RuntimeError(f"could not generate a separable matrix for view {i}")
    return Fs, AutocalibGroundTruth(K=K, omega=x_true, inlier_mask=mask)
