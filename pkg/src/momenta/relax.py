"""Shor/Lasserre relaxations of POPs and residual-minimizing programs.

Two problem shapes are covered:

* ``Pop`` -- minimize a polynomial subject to polynomial inequality and
  equality constraints.  ``shor_relax`` handles the all-quadratic case over
  a PSD variable Y with Y[0,0] = 1; ``lasserre_relax`` builds the moment
  relaxation of order r = ceil(maxdeg/2) + s with localizing constraints of
  order s (s = 0 reproduces Shor structurally).

* ``NonMinimalProblem`` -- minimize the cumulative residual of a set of
  polynomials (grouped per measurement) under L1, L2 or Linf, subject to a
  constraint set K.  Residual bounds use the scalar Riesz image of each
  polynomial (a configuration switch selects the matrix-trace variant
  instead); full localizing PSD maps are reserved for the K constraints.

Primal points are read off the order-1 moment block by SVD.  When the
minimizer set carries a sign symmetry (quaternion double cover), the optimal
moment matrix is a mixture and its odd moments center at zero; a second
"face purification" solve -- maximize a tie-break linear moment over the
epsilon-fixed optimal face -- lands on an extreme (rank-1) point of the face
and makes the extraction deterministic.  Loose solutions (rank gap > 1e-3)
are additionally polished by a few Gauss-Newton steps on the original
residuals and flagged as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .moment import MomentIndex, localizing_map, moment_index, riesz_vector
from .poly import (Polynomial, PolyBatch, gram_matrix, monomial_basis,
                   scale_variables)
from .sdp import ConicProgram, ConicSolution, SolverOptions, Status


class ExtractionDegenerateError(RuntimeError):
    """Homogeneous coordinate of the extracted point is ~0 (solution at infinity)."""


class RelaxationInfeasibleError(RuntimeError):
    """The constraint set K admits no moment solution (certified by the solver)."""


class RelaxationUnboundedError(RuntimeError):
    """The moment relaxation is unbounded below (its bound is -inf); raising
    the localizing order usually restores boundedness."""


@dataclass
class Box:
    """Componentwise interval bounds; use +-inf for unbounded coordinates."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape:
            raise ValueError("box bound shapes differ")
        if np.any(self.lo > self.hi):
            raise ValueError("empty box (lo > hi)")

    def to_json(self):
        def enc(v):
            return [None if not math.isfinite(x) else x for x in v]
        return {"lo": enc(self.lo), "hi": enc(self.hi)}

    @staticmethod
    def from_json(obj):
        def dec(vals, sign):
            return [sign * math.inf if v is None else float(v) for v in vals]
        return Box(dec(obj["lo"], -1), dec(obj["hi"], +1))


@dataclass
class PsdPolyConstraint:
    """A symmetric matrix of polynomials required PSD (e.g. the DIAC omega(x))."""

    cells: list  # list of rows of Polynomial; symmetric, upper triangle is used

    @property
    def side(self) -> int:
        return len(self.cells)

    def to_json(self):
        return {"cells": [[p.to_json() for p in row] for row in self.cells]}

    @staticmethod
    def from_json(obj):
        return PsdPolyConstraint(
            [[Polynomial.from_json(p) for p in row] for row in obj["cells"]])


@dataclass
class Pop:
    """Polynomial optimization problem: min objective s.t. p_i >= 0, q_j = 0."""

    nvars: int
    objective: Polynomial
    inequalities: list = field(default_factory=list)
    equalities: list = field(default_factory=list)

    def __post_init__(self):
        for p in [self.objective, *self.inequalities, *self.equalities]:
            if p.nvars != self.nvars:
                raise ValueError("all polynomials must share nvars")

    @property
    def max_degree(self) -> int:
        degs = [self.objective.degree] + [p.degree for p in self.inequalities] \
            + [p.degree for p in self.equalities]
        return max(degs) if degs else 0

    def to_json(self):
        return {"nvars": self.nvars,
                "objective": self.objective.to_json(),
                "inequalities": [p.to_json() for p in self.inequalities],
                "equalities": [p.to_json() for p in self.equalities]}

    @staticmethod
    def from_json(obj):
        return Pop(int(obj["nvars"]),
                   Polynomial.from_json(obj["objective"]),
                   [Polynomial.from_json(p) for p in obj.get("inequalities", [])],
                   [Polynomial.from_json(p) for p in obj.get("equalities", [])])


@dataclass
class NonMinimalProblem:
    """Residual-minimization problem over polynomial groups.

    ``groups`` holds one list of scalar residual polynomials per measurement;
    under L2 each group is treated as a stacked vector with one epsilon per
    group, under L1 each scalar polynomial gets its own epsilon, under Linf
    a single epsilon bounds everything.  ``tiebreak`` lists polynomials whose
    Riesz images are lexicographically maximized over the optimal face after
    the main solve (symmetry breaking; see module docstring).
    """

    nvars: int
    groups: list
    norm: str = "l2"
    order: int = 0
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    psd_constraints: list = field(default_factory=list)
    box: Box | None = None
    tiebreak: list = field(default_factory=list)
    residual_form: str = "scalar"  # "scalar" Riesz image or matrix "trace"

    def __post_init__(self):
        if self.norm not in ("l1", "l2", "linf"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.residual_form not in ("scalar", "trace"):
            raise ValueError(f"unknown residual form {self.residual_form!r}")
        if not self.groups:
            raise ValueError("need at least one residual group")
        for g in self.groups:
            if not g:
                raise ValueError("empty residual group")
            for p in g:
                if p.nvars != self.nvars:
                    raise ValueError("all polynomials must share nvars")
        if self.box is not None and len(self.box.lo) != self.nvars:
            raise ValueError("box dimension mismatch")

    @property
    def scalar_polys(self) -> list:
        return [p for g in self.groups for p in g]

    @property
    def max_degree(self) -> int:
        degs = [p.degree for p in self.scalar_polys]
        degs += [p.degree for p in self.equalities + self.inequalities]
        for pc in self.psd_constraints:
            degs += [p.degree for row in pc.cells for p in row]
        if self.box is not None:
            degs.append(2 if np.any(np.isfinite(self.box.lo) & np.isfinite(self.box.hi)) else 1)
        return max(degs)

    def relaxation_order(self) -> int:
        return max(1, (self.max_degree + 1) // 2 + self.order)

    def to_json(self):
        return {"nvars": self.nvars,
                "norm": self.norm,
                "order": self.order,
                "groups": [[p.to_json() for p in g] for g in self.groups],
                "equalities": [p.to_json() for p in self.equalities],
                "inequalities": [p.to_json() for p in self.inequalities],
                "psd_constraints": [pc.to_json() for pc in self.psd_constraints],
                "box": self.box.to_json() if self.box is not None else None,
                "tiebreak": [p.to_json() for p in self.tiebreak],
                "residual_form": self.residual_form}

    @staticmethod
    def from_json(obj):
        return NonMinimalProblem(
            int(obj["nvars"]),
            [[Polynomial.from_json(p) for p in g] for g in obj["groups"]],
            obj.get("norm", "l2"),
            int(obj.get("order", 0)),
            [Polynomial.from_json(p) for p in obj.get("equalities", [])],
            [Polynomial.from_json(p) for p in obj.get("inequalities", [])],
            [PsdPolyConstraint.from_json(pc) for pc in obj.get("psd_constraints", [])],
            Box.from_json(obj["box"]) if obj.get("box") else None,
            [Polynomial.from_json(p) for p in obj.get("tiebreak", [])],
            obj.get("residual_form", "scalar"))


@dataclass
class RelaxedSolution:
    """Moment solution with extracted point and tightness diagnostics."""

    x: np.ndarray
    objective: float          # relaxation optimum (primal value)
    rank_gap: float           # sigma2 / sigma1 of the order-1 moment block
    residuals: np.ndarray     # |p(x)| for each scalar residual polynomial
    moments: np.ndarray | None
    moment_matrix: np.ndarray | None
    status: str
    relaxation_loose: bool = False
    purified: bool = False
    solve_seconds: float = 0.0
    lower_bound: float = -np.inf  # dual value with residual back-off; sound
    solver_quality: float = np.inf  # max of primal/dual residuals and relgap

    def to_json(self):
        return {"x": self.x.tolist(),
                "objective": self.objective,
                "lower_bound": self.lower_bound,
                "rank_gap": self.rank_gap,
                "residuals": self.residuals.tolist(),
                "status": self.status,
                "relaxation_loose": self.relaxation_loose,
                "purified": self.purified}


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def extract_from_matrix(Y1: np.ndarray) -> tuple[np.ndarray, float]:
    """Rank-1 reading of an order-1 moment block over [1, x1..xn].

    v = sqrt(sigma1) * u1 with the sign fixed so v[0] > 0; returns
    (v[1:]/v[0], sigma2/sigma1).  Raises if the homogeneous coordinate
    vanishes (minimizer at infinity).
    """
    Y1 = 0.5 * (Y1 + Y1.T)
    U, sig, _ = np.linalg.svd(Y1)
    v = math.sqrt(max(sig[0], 0.0)) * U[:, 0]
    if v[0] < 0:
        v = -v
    rank_gap = float(sig[1] / sig[0]) if len(sig) > 1 and sig[0] > 0 else 0.0
    if abs(v[0]) < 1e-9:
        raise ExtractionDegenerateError(
            f"homogeneous coordinate {v[0]:.3e} too small; extraction degenerate")
    return v[1:] / v[0], rank_gap


def extract_point(momvals: np.ndarray, idx: MomentIndex) -> tuple[np.ndarray, float]:
    """Extract x from moment values via the (n+1)x(n+1) leading block of M^r."""
    n1 = idx.nvars + 1
    Y1 = np.asarray(momvals, dtype=float)[idx.pair[:n1, :n1]]
    return extract_from_matrix(Y1)


def extraction_candidates(momvals: np.ndarray, idx: MomentIndex) -> list[np.ndarray]:
    """Candidate points for rounding: the first-moment mean, the SVD reading,
    and the signed eigen-readings of the second-moment block (robust when odd
    moments of a sign-symmetric minimizer pair have cancelled)."""
    cands = []
    n = idx.nvars
    momvals = np.asarray(momvals, dtype=float)
    Y1 = momvals[idx.pair[:n + 1, :n + 1]]
    cands.append(Y1[0, 1:] / Y1[0, 0])  # pseudo-measure mean
    try:
        x, _ = extract_from_matrix(Y1)
        cands.append(x)
    except ExtractionDegenerateError:
        pass
    Wxx = Y1[1:, 1:]
    evals, evecs = np.linalg.eigh(0.5 * (Wxx + Wxx.T))
    v = evecs[:, -1] * math.sqrt(max(evals[-1], 0.0))
    cands.append(v)
    cands.append(-v)
    return cands


# ---------------------------------------------------------------------------
# POP relaxations
# ---------------------------------------------------------------------------

def shor_relax(pop: Pop) -> ConicProgram:
    """Shor relaxation of an all-quadratic POP over Y >= 0, Y[0,0] = 1."""
    if pop.max_degree > 2:
        raise ValueError("Shor relaxation requires all polynomials quadratic")
    n = pop.nvars
    basis = monomial_basis(n, 1)
    prog = ConicProgram()
    Y = prog.add_psd_var(basis.size, "Y")

    def trace_form(p: Polynomial):
        G = gram_matrix(p, basis).G
        ids, vals = [], []
        for i in range(basis.size):
            for j in range(i, basis.size):
                g = G[i, j] * (1.0 if i == j else 2.0)
                if g != 0.0:
                    ids.append(Y.cell(i, j))
                    vals.append(g)
        return ids, vals

    prog.add_eq([Y.cell(0, 0)], [1.0], 1.0, name="Y00")
    ids, vals = trace_form(pop.objective)
    prog.set_objective(ids, vals)
    for knum, p in enumerate(pop.inequalities):
        ids, vals = trace_form(p)
        prog.add_ge(ids, vals, 0.0, name=f"ineq{knum}")
    for knum, q in enumerate(pop.equalities):
        ids, vals = trace_form(q)
        prog.add_eq(ids, vals, 0.0, name=f"eq{knum}")
    prog.meta.update({"kind": "shor", "Y": Y, "basis": basis, "nvars": n})
    return prog


def _moment_frame(prog: ConicProgram, nvars: int, r: int):
    """Free moment scalars + the order-r moment matrix as a matrix inequality."""
    idx = moment_index(nvars, r)
    w = prog.add_free(idx.n_moments)
    prog.add_eq([w[0]], [1.0], 1.0, name="w0")
    entries = []
    size = idx.basis.size
    for i in range(size):
        for j in range(i, size):
            entries.append((i, j, int(w[idx.pair[i, j]]), 1.0))
    prog.add_lmi(size, entries, name="moment_matrix")
    return idx, w


def _riesz_sparse(p: Polynomial, idx: MomentIndex, w: np.ndarray):
    vec = riesz_vector(p, idx)
    nz = np.nonzero(vec)[0]
    return w[nz], vec[nz]


def _add_k_constraints(prog, w, idx, s, equalities, inequalities, psd_constraints,
                       box: Box | None):
    from .poly import normalize as _pnorm
    ineqs = list(inequalities)
    if box is not None:
        n = idx.nvars
        for j in range(n):
            lo, hi = box.lo[j], box.hi[j]
            xj = Polynomial.variable(n, j)
            if math.isfinite(lo):
                ineqs.append(xj - lo)
            if math.isfinite(hi):
                ineqs.append(hi - xj)
            if math.isfinite(lo) and math.isfinite(hi):
                # box product (hi - x)(x - lo) >= 0 tightens the diagonal moments
                ineqs.append((hi - xj) * (xj - lo))
    # constraint polynomials enter homogeneously (= 0 / >= 0): normalizing
    # their coefficient vectors changes nothing semantically, helps scaling
    equalities = [_pnorm(q) for q in equalities]
    ineqs = [_pnorm(p) for p in ineqs]
    for knum, q in enumerate(equalities):
        lm = localizing_map(q, idx, s)
        cells: dict[tuple[int, int], dict[int, float]] = {}
        for a, b, mid, coef in lm.entries:
            cells.setdefault((a, b), {})
            cells[(a, b)][mid] = cells[(a, b)].get(mid, 0.0) + coef
        for (a, b), form in sorted(cells.items()):
            ids = [int(w[m]) for m in sorted(form)]
            vals = [form[m] for m in sorted(form)]
            prog.add_eq(ids, vals, 0.0, name=f"keq{knum}[{a},{b}]")
    for knum, p in enumerate(ineqs):
        if s == 0:
            ids, vals = _riesz_sparse(p, idx, w)
            prog.add_ge(ids, vals, 0.0, name=f"kineq{knum}")
        else:
            lm = localizing_map(p, idx, s)
            entries = [(a, b, int(w[mid]), coef) for a, b, mid, coef in lm.entries]
            prog.add_lmi(lm.rows, entries, name=f"kineq{knum}")
    for knum, pc in enumerate(psd_constraints):
        entries = []
        for i in range(pc.side):
            for j in range(i, pc.side):
                vec = riesz_vector(pc.cells[i][j], idx)
                for mid in np.nonzero(vec)[0]:
                    entries.append((i, j, int(w[mid]), float(vec[mid])))
        prog.add_lmi(pc.side, entries, name=f"kpsd{knum}")


def lasserre_relax(pop: Pop, s: int) -> ConicProgram:
    """Moment relaxation of order r = ceil(maxdeg/2) + s.

    The moment matrix is PSD, the degree-0 moment is one, inequality
    constraints contribute order-s localizing maps (scalars at s = 0) and
    equality constraints pin their localizing maps to zero.
    """
    if s < 0:
        raise ValueError("relaxation order increment s must be >= 0")
    r = max(1, (pop.max_degree + 1) // 2 + s)
    prog = ConicProgram()
    idx, w = _moment_frame(prog, pop.nvars, r)
    ids, vals = _riesz_sparse(pop.objective, idx, w)
    prog.set_objective(ids, vals)
    _add_k_constraints(prog, w, idx, s, pop.equalities, pop.inequalities, [], None)
    prog.meta.update({"kind": "moment", "idx": idx, "w": w, "order_s": s})
    return prog


# ---------------------------------------------------------------------------
# non-minimal programs
# ---------------------------------------------------------------------------

def _residual_poly(p: Polynomial, s: int, form: str) -> Polynomial:
    """Polynomial whose Riesz image is the epsilon-bounded quantity.

    "scalar" bounds the plain Riesz image L(p); "trace" bounds the trace of
    the order-s localizing matrix, i.e. L(p * sum_a z_a^2) over the order-s
    basis (the two coincide at s = 0).
    """
    if form == "scalar" or s == 0:
        return p
    sbasis = monomial_basis(p.nvars, s)
    sigma = Polynomial.zero(p.nvars)
    for m in sbasis.monomials:
        sq = tuple(2 * e for e in m)
        sigma = sigma + Polynomial(p.nvars, {sq: 1.0})
    return p * sigma


def nonminimal_program(prob: NonMinimalProblem) -> ConicProgram:
    """Build the conic program of the L1/L2/Linf residual-minimizing relaxation."""
    r = prob.relaxation_order()
    s = prob.order
    prog = ConicProgram()
    idx, w = _moment_frame(prog, prob.nvars, r)
    _add_k_constraints(prog, w, idx, s, prob.equalities, prob.inequalities,
                       prob.psd_constraints, prob.box)

    eps_ids: list[int] = []
    if prob.norm == "linf":
        eps = prog.add_free(1)
        eps_ids = [int(eps[0])]
        for gi, g in enumerate(prob.groups):
            for pi, p in enumerate(g):
                ids, vals = _riesz_sparse(_residual_poly(p, s, prob.residual_form), idx, w)
                prog.add_le(np.append(ids, eps[0]), np.append(vals, -1.0), 0.0,
                            name=f"res{gi}.{pi}+")
                prog.add_le(np.append(ids, eps[0]), np.append(-vals, -1.0), 0.0,
                            name=f"res{gi}.{pi}-")
        prog.set_objective(eps_ids, [1.0])
    elif prob.norm == "l1":
        for gi, g in enumerate(prob.groups):
            for pi, p in enumerate(g):
                eps = prog.add_free(1)
                eps_ids.append(int(eps[0]))
                ids, vals = _riesz_sparse(_residual_poly(p, s, prob.residual_form), idx, w)
                prog.add_le(np.append(ids, eps[0]), np.append(vals, -1.0), 0.0,
                            name=f"res{gi}.{pi}+")
                prog.add_le(np.append(ids, eps[0]), np.append(-vals, -1.0), 0.0,
                            name=f"res{gi}.{pi}-")
        prog.set_objective(eps_ids, np.ones(len(eps_ids)))
    else:  # l2: one SOC per measurement group
        for gi, g in enumerate(prob.groups):
            eps = prog.add_free(1)
            eps_ids.append(int(eps[0]))
            u_rows = []
            for p in g:
                ids, vals = _riesz_sparse(_residual_poly(p, s, prob.residual_form), idx, w)
                u_rows.append((ids, vals, 0.0))
            prog.add_soc_constraint([eps[0]], [1.0], 0.0, u_rows, name=f"res{gi}")
        prog.set_objective(eps_ids, np.ones(len(eps_ids)))

    prog.meta.update({"kind": "moment", "idx": idx, "w": w, "eps_ids": eps_ids,
                      "order_s": s})
    return prog


# ---------------------------------------------------------------------------
# solving / purification / polish
# ---------------------------------------------------------------------------


def _certified_lower_bound(sol: ConicSolution) -> float:
    """Dual value backed off by the residual quality: a sound lower bound."""
    margin = 10.0 * max(sol.pres, sol.dres, 0.0)
    return min(sol.objective, sol.dual_objective) - margin * (
        1.0 + abs(sol.dual_objective))


def gauss_newton_polish(polys: Sequence[Polynomial] | PolyBatch, x0: np.ndarray,
                        iters: int = 10) -> np.ndarray:
    """Damped Gauss-Newton on the stacked residual system (local polish)."""
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    batch = polys if isinstance(polys, PolyBatch) else PolyBatch(polys, n)
    for _ in range(iters):
        r = batch.values(x)
        J = batch.jacobian(x)
        JtJ = J.T @ J
        lam = 1e-12 * (1.0 + np.trace(JtJ))
        try:
            delta = np.linalg.solve(JtJ + lam * np.eye(n), -J.T @ r)
        except np.linalg.LinAlgError:
            break
        x = x + delta
        if np.linalg.norm(delta) < 1e-14 * (1.0 + np.linalg.norm(x)):
            break
    return x


def adaptive_tiebreaks(momvals: np.ndarray, idx: MomentIndex) -> list:
    """Symmetry-breaking directions read off the pseudo-moment covariance.

    When the optimal face mixes sign-symmetric minimizers, the mixed
    coordinates show up as variance in Cov = Wxx - wx wx'; maximizing the
    first moment along the leading covariance eigenvector (either sign, the
    wrong one is blocked by any half-space cut in K) lands on one atom."""
    n = idx.nvars
    Y1 = np.asarray(momvals, dtype=float)[idx.pair[:n + 1, :n + 1]]
    wx = Y1[0, 1:] / Y1[0, 0]
    cov = Y1[1:, 1:] - np.outer(wx, wx)
    evals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if evals[-1] <= 1e-10 * (1.0 + float(np.trace(Y1))):
        return []
    d = vecs[:, -1]
    if d[int(np.argmax(np.abs(d)))] < 0:
        d = -d
    p = Polynomial.from_affine(n, d)
    return [p, p * -1.0]


def _purify_face(build, base_objective: float, tiebreaks: Sequence[Polynomial],
                 options: SolverOptions | None,
                 slack_scale: float = 1e-8) -> np.ndarray | None:
    """Purify the optimal face to an extreme (rank-1, when tight) point.

    ``build`` returns a fresh program (meta must carry idx and w); the face
    is the objective's epsilon-fixed level set.  The first stage minimizes
    the trace of the second moments (the convex surrogate for minimum rank),
    which pins every coordinate no residual touches to its minimal PSD
    completion.  If the order-1 block still is not rank one, the leftover
    variance identifies a mixed (sign-symmetric) direction: maximizing the
    first moment along it -- the explicit ``tiebreaks`` if given, otherwise
    the covariance eigenvector of the trace-purified moments -- selects one
    atom, and a final trace stage pins the rest.  Returns the moment vector
    with the smallest rank gap seen, or None if no stage solved.
    """
    import dataclasses
    slack = slack_scale * (1.0 + abs(base_objective))
    fixed: list[tuple[Polynomial, float]] = []
    idx0 = build().meta["idx"]
    nvars = idx0.nvars
    neg_trace = Polynomial.zero(nvars)
    for j in range(nvars):
        xj = Polynomial.variable(nvars, j)
        neg_trace = neg_trace - xj * xj
    base_opts = options or SolverOptions()
    stage_opts = dataclasses.replace(base_opts, maxiter=min(base_opts.maxiter, 60))

    best: np.ndarray | None = None
    best_gap = np.inf

    def run_stage(tb: Polynomial, opts, remember: bool = True):
        nonlocal best, best_gap
        prog = build()
        idx, w = prog.meta["idx"], prog.meta["w"]
        prog.add_le(prog.obj_ids, prog.obj_vals, base_objective + slack, name="face")
        for (ptb, val) in fixed:
            ids, vals = _riesz_sparse(ptb, idx, w)
            prog.add_ge(ids, vals, val - slack, name="tb_fixed")
        ids, vals = _riesz_sparse(tb, idx, w)
        prog.set_objective(ids, -np.asarray(vals))  # maximize
        cand = prog.solve(opts)
        quality = max(cand.pres, cand.dres, abs(cand.relgap))
        if cand.status not in (Status.OPTIMAL, Status.NUMERICAL_LIMIT) \
                or not np.all(np.isfinite(cand.x)) or quality > 1e-2:
            return None
        mom = cand.value(w)
        achieved = float(np.asarray(vals) @ cand.x[np.asarray(ids)])
        if remember:
            fixed.append((tb, achieved))
        n1 = idx.nvars + 1
        Y1 = mom[idx.pair[:n1, :n1]]
        sig = np.linalg.svd(0.5 * (Y1 + Y1.T), compute_uv=False)
        gap = float(sig[1] / sig[0]) if sig[0] > 0 else 1.0
        # the informative moments are pinned by the face constraints, so the
        # observed rank gap is the deciding quantity; the quality gate only
        # guards against badly failed stage iterates
        if gap < best_gap and quality <= 1e-3:
            best, best_gap = mom, gap
        return mom, achieved, gap

    out = run_stage(neg_trace, stage_opts)
    if best_gap <= 1e-6:
        return best
    stages = list(tiebreaks)
    if not stages:
        # seed the adaptive direction from the best moments seen so far
        seed_mom = out[0] if out is not None else None
        if seed_mom is not None:
            stages = adaptive_tiebreaks(seed_mom, idx0)
    probe_results = []
    for tb in stages:
        # probe without pinning: a wrong-sign or failed probe must not block
        # or constrain the later stages
        out = run_stage(tb, stage_opts, remember=False)
        if out is None:
            continue
        _, achieved, gap = out
        if best_gap <= 1e-6:
            return best
        probe_results.append((achieved, tb))
    if probe_results:
        achieved, tb = max(probe_results, key=lambda t: t[0])
        if achieved > 1e-3:
            fixed.append((tb, achieved))  # pin the winning direction
    run_stage(neg_trace, stage_opts)
    if best_gap > 1e-7:
        # borderline face: one tighter-tolerance pass, kept only if it helps
        hard = dataclasses.replace(stage_opts, feastol=1e-10, abstol=1e-10,
                                   reltol=1e-10, maxiter=100)
        run_stage(neg_trace, hard, remember=False)
    return best


def variable_scales(prob: NonMinimalProblem) -> np.ndarray:
    """Per-variable magnitudes from the box (ones where unbounded)."""
    sigma = np.ones(prob.nvars)
    if prob.box is not None:
        mag = np.maximum(np.abs(prob.box.lo), np.abs(prob.box.hi))
        ok = np.isfinite(mag) & (mag > 0)
        sigma[ok] = mag[ok]
    return sigma


def scale_problem(prob: NonMinimalProblem, sigma: np.ndarray) -> NonMinimalProblem:
    """Rewrite the problem in y = x / sigma; residual values are unchanged."""
    def sp(p):
        return scale_variables(p, sigma)
    box = None
    if prob.box is not None:
        box = Box(prob.box.lo / sigma, prob.box.hi / sigma)
    return NonMinimalProblem(
        nvars=prob.nvars,
        groups=[[sp(p) for p in g] for g in prob.groups],
        norm=prob.norm,
        order=prob.order,
        equalities=[sp(q) for q in prob.equalities],
        inequalities=[sp(p) for p in prob.inequalities],
        psd_constraints=[PsdPolyConstraint([[sp(p) for p in row] for row in pc.cells])
                         for pc in prob.psd_constraints],
        box=box,
        tiebreak=[sp(p) for p in prob.tiebreak],
        residual_form=prob.residual_form,
    )


def solve_nonminimal(prob: NonMinimalProblem,
                     options: SolverOptions | None = None,
                     polish: bool = True, purify: bool = True) -> RelaxedSolution:
    """Solve the relaxation; purify the face when it is not rank-1; extract x.

    When the box declares variable magnitudes far from one, the solve runs
    in box-normalized variables (better conditioned) and results are mapped
    back; residual values and thresholds are invariant under the rescaling.
    """
    import time
    t0 = time.perf_counter()
    original = prob
    sigma = variable_scales(prob)
    scaled = not np.allclose(sigma, 1.0)
    if scaled:
        prob = scale_problem(prob, sigma)
    prog = nonminimal_program(prob)
    idx, w = prog.meta["idx"], prog.meta["w"]
    sol = prog.solve(options)
    if sol.status == Status.INFEASIBLE:
        raise RelaxationInfeasibleError("constraint set K admits no moment solution")
    if sol.status == Status.UNBOUNDED:
        raise RelaxationUnboundedError(
            "residual relaxation unbounded below; raise the order s")
    objective = sol.objective
    momvals = sol.value(w)
    purified = False
    near_optimal = sol.status == Status.OPTIMAL or (
        sol.status == Status.NUMERICAL_LIMIT
        and max(sol.pres, sol.dres, abs(sol.relgap)) <= 1e-5)
    if purify and near_optimal:
        n1 = idx.nvars + 1
        Y1 = momvals[idx.pair[:n1, :n1]]
        sig = np.linalg.svd(0.5 * (Y1 + Y1.T), compute_uv=False)
        if sig[0] <= 0 or sig[1] / sig[0] > 1e-6:
            slack_scale = max(1e-8, 10.0 * max(sol.pres, sol.dres, abs(sol.relgap))
                              if sol.status != Status.OPTIMAL else 1e-8)
            better = _purify_face(lambda: nonminimal_program(prob), objective,
                                  prob.tiebreak, options, slack_scale=slack_scale)
            if better is not None:
                momvals = better
                purified = True
    x, rank_gap = extract_point(momvals, idx)
    loose = rank_gap > 1e-3
    if loose and polish:
        x = gauss_newton_polish(prob.scalar_polys + prob.equalities, x)
    if scaled:
        x = x * sigma
        # unscale the moments: w_alpha = w~_alpha * sigma^alpha
        powers = np.array([float(np.prod(sigma ** np.array(m)))
                           for m in idx.momvars])
        momvals = momvals * powers
    residuals = np.array([abs(p(x)) for p in original.scalar_polys])
    return RelaxedSolution(
        x=x, objective=objective, rank_gap=rank_gap, residuals=residuals,
        moments=momvals, moment_matrix=idx.moment_matrix(momvals),
        status=sol.status.value, relaxation_loose=loose, purified=purified,
        solve_seconds=time.perf_counter() - t0,
        lower_bound=_certified_lower_bound(sol),
        solver_quality=max(sol.pres, sol.dres, abs(sol.relgap)))


def solve_pop(pop: Pop, s: int = 0, options: SolverOptions | None = None,
              polish: bool = True, purify: bool = True) -> RelaxedSolution:
    """Lasserre-relax and solve a POP; extraction, purification and polish.

    ``purify`` lexicographically maximizes the first moments over the
    optimal face before extraction, which lands on one minimizer when the
    minimizer set is finite but symmetric (deterministic reporting).
    """
    prog = lasserre_relax(pop, s)
    idx, w = prog.meta["idx"], prog.meta["w"]
    sol = prog.solve(options)
    if sol.status == Status.INFEASIBLE:
        raise RelaxationInfeasibleError("POP constraint set admits no moment solution")
    if sol.status == Status.UNBOUNDED:
        raise RelaxationUnboundedError(
            "moment relaxation unbounded below on K at this order")
    momvals = sol.value(w)
    purified = False
    if purify and sol.status == Status.OPTIMAL:
        n1 = idx.nvars + 1
        Y1 = momvals[idx.pair[:n1, :n1]]
        sig = np.linalg.svd(0.5 * (Y1 + Y1.T), compute_uv=False)
        if sig[0] <= 0 or sig[1] / sig[0] > 1e-6:
            better = _purify_face(lambda: lasserre_relax(pop, s), sol.objective,
                                  [], options)
            if better is not None:
                momvals = better
                purified = True
    x, rank_gap = extract_point(momvals, idx)
    loose = rank_gap > 1e-3
    if loose and polish:
        x = gauss_newton_polish([pop.objective.diff(j) for j in range(pop.nvars)]
                                + pop.equalities, x)
    return RelaxedSolution(
        x=x, objective=sol.objective, rank_gap=rank_gap,
        residuals=np.array([abs(q(x)) for q in pop.equalities]),
        moments=momvals, moment_matrix=idx.moment_matrix(momvals),
        status=sol.status.value, relaxation_loose=loose, purified=purified,
        lower_bound=_certified_lower_bound(sol),
        solver_quality=max(sol.pres, sol.dres, abs(sol.relgap)))
