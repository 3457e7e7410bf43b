"""Quartic systems in two variables for isometric non-rigid reconstruction.

Each non-reference image contributes one quartic polynomial in the
Christoffel-symbol pair x = (k1, k2); the warp pipeline that derives its
coefficients is upstream of this package, so systems arrive as coefficient
files (or from the planted generator below) and are solved as an L1
non-minimal problem.  Quartics generally need one step up the moment
hierarchy: the minimal-order relaxation (s = 0) is loose on these systems
and mainly useful as a cheap baseline, while s = 1 is the recommended
default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..poly import Polynomial
from ..relax import Box, NonMinimalProblem, RelaxedSolution, solve_nonminimal
from ..sdp import SolverOptions

NVARS = 2


@dataclass
class QuarticSystem:
    """Polynomials of degree <= 4 in (k1, k2), one per non-reference image."""

    polys: list

    def __post_init__(self):
        if not self.polys:
            raise ValueError("empty quartic system")
        for p in self.polys:
            if p.nvars != NVARS:
                raise ValueError("quartic system polynomials live in 2 variables")
            if p.degree > 4:
                raise ValueError(f"degree {p.degree} > 4 not allowed")

    def to_json(self):
        return {"polys": [p.to_json() for p in self.polys]}

    @staticmethod
    def from_json(obj):
        return QuarticSystem([Polynomial.from_json(p) for p in obj["polys"]])


def nrsfm_problem(system: QuarticSystem, s: int = 1,
                  box: Box | None = None) -> NonMinimalProblem:
    if box is None:
        box = Box([-2.0, -2.0], [2.0, 2.0])
    return NonMinimalProblem(
        nvars=NVARS,
        groups=[[p] for p in system.polys],
        norm="l1",
        order=s,
        box=box,
    )


def nrsfm_solve(system: QuarticSystem, s: int = 1,
                box: Box | None = None,
                options: SolverOptions | None = None) -> RelaxedSolution:
    """L1 non-minimal solve of the quartic system at hierarchy order s."""
    return solve_nonminimal(nrsfm_problem(system, s=s, box=box), options=options)


@dataclass
class NrsfmGroundTruth:
    k: np.ndarray  # planted (k1, k2)

    def to_json(self):
        return {"k": self.k.tolist()}


def _random_conic(rng, through: np.ndarray, grad_min: float = 0.35) -> Polynomial:
    """Unit-norm conic vanishing at ``through`` with a healthy gradient there."""
    k1 = Polynomial.variable(NVARS, 0)
    k2 = Polynomial.variable(NVARS, 1)
    while True:
        c = rng.standard_normal(6)
        g = (c[0] * k1 * k1 + c[1] * k1 * k2 + c[2] * k2 * k2
             + c[3] * k1 + c[4] * k2 + c[5])
        g = g - g(through)
        gn = g.coefficient_norm()
        if gn < 1e-6:
            continue
        g = g * (1.0 / gn)
        grad = np.array([g.diff(0)(through), g.diff(1)(through)])
        if np.linalg.norm(grad) >= grad_min:
            return g


def synth_quartic_system(npolys: int, root=None, noise: float = 0.0,
                         seed: int = 0, rim: float = 0.6,
                         ) -> tuple[QuarticSystem, NrsfmGroundTruth]:
    """Planted quartic systems with a flat root and an indefinite far rim.

    Each polynomial is

        p = g^2 + rim * (1 - ||x||^2 / 9) * h^2

    with g a unit-norm conic and h a unit affine form, both vanishing at the
    planted (k1, k2).  On the working box [-2, 2]^2 (inside the radius-3
    disk) p is nonnegative with its only zero at the root; outside the disk
    p dips negative along the conic curve.  The minimal-order relaxation has
    no control over the quartic moments beyond the box scalars, so it can
    push the Riesz image of p to zero with out-of-box pseudo-support; the
    order-one localizing matrices of the box constraints close that hole.
    ``noise`` adds relative coefficient perturbations.
    """
    rng = np.random.default_rng(seed)
    if root is None:
        root = rng.uniform(-1.5, 1.5, 2)
    root = np.asarray(root, dtype=float)
    k1 = Polynomial.variable(NVARS, 0)
    k2 = Polynomial.variable(NVARS, 1)
    disk = 1.0 - (k1 * k1) * (1.0 / 9.0) - (k2 * k2) * (1.0 / 9.0)
    polys = []
    while len(polys) < npolys:
        g = _random_conic(rng, root)
        d = rng.standard_normal(2)
        nd = np.linalg.norm(d)
        if nd < 1e-9:
            continue
        d /= nd
        h = d[0] * (k1 - root[0]) + d[1] * (k2 - root[1])
        q = g * g + rim * (disk * (h * h))
        qn = q.coefficient_norm()
        if qn < 1e-9:
            continue
        q = q * (1.0 / qn)
        if noise > 0:
            terms = dict(q.terms)
            for e in list(terms):
                terms[e] += rng.normal(0.0, noise / np.sqrt(len(terms)))
            q = Polynomial(NVARS, terms)
        polys.append(q)
    return QuarticSystem(polys), NrsfmGroundTruth(root.copy())
