"""Rigid body transformation as a quadratic polynomial system.

Variables are x = (q0, q1, q2, q3, t1, t2, t3): a quaternion (scalar part
first) and a translation.  Each correspondence (u, v) with v = R(q) u + t
contributes the vector residual P(x) = v - R(q) u - t whose three components
are quadratic in x; the constraint set is the unit-quaternion sphere
||q||^2 = 1 together with q0 >= 0, which picks one representative of the
double cover (q and -q encode the same rotation; without the half-space cut
the relaxed moment solution is free to mix both and its odd moments cancel).

R(q) is the homogeneous quadratic form of the quaternion, exact on the unit
sphere:

    R(q) = [[q0^2+q1^2-q2^2-q3^2, 2(q1 q2 - q0 q3),    2(q1 q3 + q0 q2)],
            [2(q1 q2 + q0 q3),    q0^2-q1^2+q2^2-q3^2, 2(q2 q3 - q0 q1)],
            [2(q1 q3 - q0 q2),    2(q2 q3 + q0 q1),    q0^2-q1^2-q2^2+q3^2]]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..poly import Polynomial
from ..relax import Box, NonMinimalProblem, RelaxedSolution, solve_nonminimal
from ..sdp import SolverOptions

NVARS = 7  # (q0..q3, t1..t3)


@dataclass(frozen=True)
class Correspondence3D:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.u.shape != (3,) or self.v.shape != (3,):
            raise ValueError("correspondences are pairs of 3-vectors")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("non-finite correspondence")


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix, scalar part nonnegative."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        x = (R[2, 1] - R[1, 2]) / (4 * w)
        y = (R[0, 2] - R[2, 0]) / (4 * w)
        z = (R[1, 0] - R[0, 1]) / (4 * w)
        q = np.array([w, x, y, z])
    else:
        d = np.diag(R)
        i = int(np.argmax(d))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(max(1.0 + d[i] - d[j] - d[k], 0.0))
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / (2 * r)
        q[1 + i] = 0.5 * r
        q[1 + j] = (R[j, i] + R[i, j]) / (2 * r)
        q[1 + k] = (R[k, i] + R[i, k]) / (2 * r)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def rotation_angle_deg(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees."""
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


@dataclass
class RigidEstimate:
    """Unit quaternion (scalar part >= 0) and translation."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-8:
            raise ValueError(f"quaternion norm {n} not within 1e-8 of 1")
        if q[0] < 0:
            q = -q
        self.q = q
        self.t = np.asarray(self.t, dtype=float)

    @property
    def R(self) -> np.ndarray:
        return quat_to_rot(self.q)

    @staticmethod
    def from_point(x: np.ndarray) -> "RigidEstimate":
        q = np.asarray(x[:4], dtype=float)
        nrm = np.linalg.norm(q)
        if nrm < 1e-12:
            raise ValueError("degenerate quaternion block")
        return RigidEstimate(q / nrm, np.asarray(x[4:7], dtype=float))


def _rotation_row_polys(u: np.ndarray) -> list[Polynomial]:
    """The three components of R(q) u as quadratics in x = (q, t)."""
    n = NVARS
    q = [Polynomial.variable(n, j) for j in range(4)]
    w, x, y, z = q
    rows = [
        (w * w + x * x - y * y - z * z) * u[0] + (x * y - w * z) * (2 * u[1])
        + (x * z + w * y) * (2 * u[2]),
        (x * y + w * z) * (2 * u[0]) + (w * w - x * x + y * y - z * z) * u[1]
        + (y * z - w * x) * (2 * u[2]),
        (x * z - w * y) * (2 * u[0]) + (y * z + w * x) * (2 * u[1])
        + (w * w - x * x - y * y + z * z) * u[2],
    ]
    return rows


def residual_group(c: Correspondence3D) -> list[Polynomial]:
    """P(x) = v - R(q) u - t, three quadratic scalar polynomials."""
    n = NVARS
    rows = _rotation_row_polys(c.u)
    out = []
    for axis in range(3):
        t_axis = Polynomial.variable(n, 4 + axis)
        out.append(Polynomial.constant(n, c.v[axis]) - rows[axis] - t_axis)
    return out


def unit_quaternion_constraint() -> Polynomial:
    n = NVARS
    p = Polynomial.zero(n)
    for j in range(4):
        qj = Polynomial.variable(n, j)
        p = p + qj * qj
    return p - 1.0


def rigid_residuals(corrs, norm: str = "l2", order: int = 0,
                    t_box: tuple[float, float] | None = None) -> NonMinimalProblem:
    """Non-minimal problem for a set of correspondences (at least 3).

    Residuals are grouped per point (3 scalars each, L2 by default since the
    threshold is a Euclidean distance); K is the quaternion sphere plus the
    q0 >= 0 half-space cut.  Purification tie-breaks on the quaternion
    moments make the extraction side deterministic across the double cover.
    ``t_box`` optionally bounds each translation coordinate.
    """
    corrs = [c if isinstance(c, Correspondence3D) else Correspondence3D(*c)
             for c in corrs]
    if len(corrs) < 3:
        raise ValueError("rigid estimation needs at least 3 correspondences")
    groups = [residual_group(c) for c in corrs]
    n = NVARS
    box = None
    if t_box is not None:
        lo = np.concatenate([[-1.0] * 4, [t_box[0]] * 3])
        hi = np.concatenate([[+1.0] * 4, [t_box[1]] * 3])
        box = Box(lo, hi)
    return NonMinimalProblem(
        nvars=n,
        groups=groups,
        norm=norm,
        order=order,
        equalities=[unit_quaternion_constraint()],
        inequalities=[Polynomial.variable(n, 0)],  # q0 >= 0 (half the double cover)
        box=box,
    )


def estimate_rigid(corrs, norm: str = "l2", order: int = 0,
                   options: SolverOptions | None = None
                   ) -> tuple[RigidEstimate, RelaxedSolution]:
    """Solve the non-minimal problem and read off the transform."""
    prob = rigid_residuals(corrs, norm=norm, order=order)
    sol = solve_nonminimal(prob, options=options)
    return RigidEstimate.from_point(sol.x), sol


def data_t_box(corrs) -> tuple[np.ndarray, np.ndarray]:
    """Conservative per-axis bounds on t = v - R u over all data pairings."""
    U = np.array([np.asarray(c.u, dtype=float) for c in corrs])
    V = np.array([np.asarray(c.v, dtype=float) for c in corrs])
    reach = float(np.max(np.linalg.norm(U, axis=1)))
    return V.min(axis=0) - reach, V.max(axis=0) + reach


def rigid_consensus_problem(corrs, eps: float, node_limit: int = 100000,
                            time_limit: float | None = None):
    """Consensus maximization over correspondences: a group is an inlier when
    ||v - R(q) u - t|| <= eps (Euclidean, metric residuals not normalized)."""
    from ..consensus import ConsensusProblem
    corrs = [c if isinstance(c, Correspondence3D) else Correspondence3D(*c)
             for c in corrs]
    n = NVARS
    t_lo, t_hi = data_t_box(corrs)
    box = Box(np.concatenate([[-1.0] * 4, t_lo]),
              np.concatenate([[+1.0] * 4, t_hi]))
    return ConsensusProblem(
        nvars=n,
        groups=[residual_group(c) for c in corrs],
        eps=eps,
        group_norm="l2",
        order=0,
        equalities=[unit_quaternion_constraint()],
        inequalities=[Polynomial.variable(n, 0)],
        box=box,
        node_limit=node_limit,
        time_limit=time_limit,
    )


def fit_rigid_svd(corrs) -> RigidEstimate:
    """Closed-form least-squares rigid fit (Kabsch/Horn); local baseline."""
    U = np.array([np.asarray(c.u if isinstance(c, Correspondence3D) else c[0],
                             dtype=float) for c in corrs])
    V = np.array([np.asarray(c.v if isinstance(c, Correspondence3D) else c[1],
                             dtype=float) for c in corrs])
    cu, cv = U.mean(axis=0), V.mean(axis=0)
    H = (U - cu).T @ (V - cv)
    W, _, Zt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Zt.T @ W.T))
    R = Zt.T @ np.diag([1.0, 1.0, d]) @ W.T
    t = cv - R @ cu
    return RigidEstimate(rot_to_quat(R), t)


@dataclass
class RigidGroundTruth:
    q: np.ndarray
    t: np.ndarray
    inlier_mask: np.ndarray     # True where the correspondence is an inlier
    noise_sigma_abs: float      # absolute noise level (sigma * cloud diameter)
    diameter: float

    @property
    def R(self) -> np.ndarray:
        return quat_to_rot(self.q)

    def to_json(self):
        return {"q": self.q.tolist(), "t": self.t.tolist(),
                "inlier_mask": [bool(b) for b in self.inlier_mask],
                "noise_sigma_abs": self.noise_sigma_abs,
                "diameter": self.diameter}


def synth_rigid(npts: int, noise_sigma: float, outlier_frac: float, seed: int
                ) -> tuple[list[Correspondence3D], RigidGroundTruth]:
    """Deterministic planted rigid instance.

    Rotation uniform on SO(3) (normalized Gaussian quaternion), translation
    uniform in [-1, 1]^3, source points uniform in [-1, 1]^3.  Gaussian noise
    with sigma = noise_sigma * cloud diameter is added to the targets; a
    ceil(outlier_frac * npts)-subset of targets is replaced by uniform draws
    from the doubled target bounding box.
    """
    if npts < 3:
        raise ValueError("need at least 3 points")
    if not 0.0 <= outlier_frac < 1.0:
        raise ValueError("outlier_frac must be in [0, 1)")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    t = rng.uniform(-1.0, 1.0, 3)
    U = rng.uniform(-1.0, 1.0, (npts, 3))
    diffs = U[:, None, :] - U[None, :, :]
    diameter = float(np.sqrt((diffs ** 2).sum(axis=2)).max())
    R = quat_to_rot(q)
    V = U @ R.T + t
    sigma_abs = noise_sigma * diameter
    if sigma_abs > 0:
        V = V + rng.normal(0.0, sigma_abs, V.shape)
    n_out = int(np.ceil(outlier_frac * npts))
    mask = np.ones(npts, dtype=bool)
    if n_out:
        out_idx = rng.choice(npts, size=n_out, replace=False)
        mask[out_idx] = False
        center = 0.5 * (V.min(axis=0) + V.max(axis=0))
        half = np.maximum(V.max(axis=0) - center, 1e-6)
        lo, hi = center - 2.0 * half, center + 2.0 * half
        V[out_idx] = rng.uniform(lo, hi, (n_out, 3))
    corrs = [Correspondence3D(U[i], V[i]) for i in range(npts)]
    return corrs, RigidGroundTruth(q, t, mask, sigma_abs, diameter)
