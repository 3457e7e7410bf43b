"""Deterministic consensus maximization via branch-and-bound on a big-M MI-SDP.

A measurement group is an inlier when its residual polynomials all stay
within a threshold eps at the model point x.  Binary variables z_i (0 inlier,
1 outlier) deactivate a group's residual constraints through a big-M bound

    z_i M_i + eps >= |residual_i(x)|,

and the fewest-outliers objective min sum z_i is bounded below at every
branch-and-bound node by the moment relaxation with the free z_i relaxed to
[0, 1].  Nodes are explored best-first; branching picks the free z_i whose
relaxed value is closest to one half (ties toward the lowest index) and the
inlier child is explored first.  Incumbents come from rounding: candidate
model points are extracted from the node's moment block, polished by a few
Gauss-Newton steps on the currently passing groups, classified against eps,
and the winning assignment is re-verified by a restricted feasibility solve.
Certification is by exhaustion: when no open node can beat the incumbent,
the incumbent's inlier count is optimal for the relaxation-verified notion
of feasibility, and every reported inlier is witnessed by a concrete x.

All decisions (branch order, tie-breaks, heap order) are deterministic;
reported inlier sets tie-break to the lexicographically smallest mask.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial, PolyBatch
from .relax import (Box, NonMinimalProblem, PsdPolyConstraint,
                    RelaxationInfeasibleError, RelaxationUnboundedError,
                    _add_k_constraints, _moment_frame, _riesz_sparse,
                    extraction_candidates, gauss_newton_polish, scale_problem,
                    scale_variables, solve_nonminimal, variable_scales)
from .sdp import ConicProgram, SolverOptions, Status


def big_m_from_box(p: Polynomial, box: Box) -> float:
    """Interval upper bound of |p| over the box: sum |c| * prod max(|lo|,|hi|)^e.

    Guaranteed >= max_box |p(x)|; requires finite bounds for every variable
    actually appearing in p.
    """
    mag = np.maximum(np.abs(box.lo), np.abs(box.hi))
    total = 0.0
    for exp, coef in p.terms.items():
        t = abs(coef)
        for j, e in enumerate(exp):
            if e:
                if not math.isfinite(mag[j]):
                    raise ValueError(f"variable x{j + 1} appears in p but is unbounded")
                t *= mag[j] ** e
        total += t
    return total


@dataclass
class ConsensusProblem:
    """Consensus maximization instance over residual groups.

    ``group_norm`` decides group membership: "max" requires every scalar
    residual within eps (elementwise), "l2" thresholds the Euclidean norm of
    the group's residual vector.  ``big_m`` holds one constant per group; use
    :func:`big_m_from_box` (done automatically when omitted and a finite box
    is present).
    """

    nvars: int
    groups: list
    eps: float
    group_norm: str = "max"
    order: int = 0
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    psd_constraints: list = field(default_factory=list)
    box: Box | None = None
    big_m: np.ndarray | None = None
    tiebreak: list = field(default_factory=list)
    node_limit: int = 100000
    time_limit: float | None = None
    node_tol: float = 1e-6

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not self.groups:
            raise ValueError("need at least one residual group")
        if self.group_norm not in ("max", "l2"):
            raise ValueError(f"unknown group norm {self.group_norm!r}")
        if self.big_m is None:
            if self.box is None:
                raise ValueError("need either big_m values or a finite box")
            self.big_m = np.array([
                max(big_m_from_box(p, self.box) for p in g) for g in self.groups])
        self.big_m = np.asarray(self.big_m, dtype=float)
        if len(self.big_m) != len(self.groups):
            raise ValueError("one big-M per group required")
        if np.any(self.big_m <= self.eps):
            raise ValueError("big-M values must exceed eps")

    @property
    def m(self) -> int:
        return len(self.groups)

    def to_json(self):
        return {"nvars": self.nvars,
                "eps": self.eps,
                "group_norm": self.group_norm,
                "order": self.order,
                "groups": [[p.to_json() for p in g] for g in self.groups],
                "equalities": [p.to_json() for p in self.equalities],
                "inequalities": [p.to_json() for p in self.inequalities],
                "psd_constraints": [pc.to_json() for pc in self.psd_constraints],
                "box": self.box.to_json() if self.box else None,
                "big_m": self.big_m.tolist(),
                "tiebreak": [p.to_json() for p in self.tiebreak],
                "node_limit": self.node_limit,
                "time_limit": self.time_limit}

    @staticmethod
    def from_json(obj):
        return ConsensusProblem(
            int(obj["nvars"]),
            [[Polynomial.from_json(p) for p in g] for g in obj["groups"]],
            float(obj["eps"]),
            obj.get("group_norm", "max"),
            int(obj.get("order", 0)),
            [Polynomial.from_json(p) for p in obj.get("equalities", [])],
            [Polynomial.from_json(p) for p in obj.get("inequalities", [])],
            [PsdPolyConstraint.from_json(pc) for pc in obj.get("psd_constraints", [])],
            Box.from_json(obj["box"]) if obj.get("box") else None,
            np.asarray(obj["big_m"], dtype=float) if obj.get("big_m") else None,
            [Polynomial.from_json(p) for p in obj.get("tiebreak", [])],
            int(obj.get("node_limit", 100000)),
            obj.get("time_limit"))


@dataclass
class BnbNode:
    """Partial assignment: 0 forced inlier, 1 forced outlier, None free."""

    assign: tuple
    bound: int
    depth: int
    zrel: tuple  # relaxed z per group (forced values included)


@dataclass
class TraceEntry:
    iteration: int
    pessimistic: int
    optimistic: int
    open_nodes: int
    elapsed: float

    def to_json(self):
        return {"iteration": self.iteration, "pessimistic": self.pessimistic,
                "optimistic": self.optimistic, "open_nodes": self.open_nodes,
                "elapsed": self.elapsed}


@dataclass
class ConsensusResult:
    inlier_mask: np.ndarray
    inlier_count: int
    certified: bool
    gap: int                   # best-possible inliers minus found inliers
    x: np.ndarray | None
    status: str                # "certified" | "limit" | "infeasible"
    nodes: int
    trace: list

    def to_json(self):
        return {"inlier_mask": [bool(b) for b in self.inlier_mask],
                "inlier_count": self.inlier_count,
                "certified": self.certified,
                "gap": self.gap,
                "x": self.x.tolist() if self.x is not None else None,
                "status": self.status,
                "nodes": self.nodes,
                "trace": [t.to_json() for t in self.trace]}


# --------------------------------------------------------------------------
# fast residual evaluation (compiled polynomial batches)
# --------------------------------------------------------------------------

class _CompiledGroups:
    """Vectorized |P_i(x)| evaluation for all groups at once."""

    def __init__(self, groups, nvars: int):
        exps, coefs, ptr = [], [], [0]
        self.group_ptr = [0]
        for g in groups:
            for p in g:
                for e, c in sorted(p.terms.items()):
                    exps.append(e)
                    coefs.append(c)
                ptr.append(len(coefs))
            self.group_ptr.append(ptr.__len__() - 1)
        self.E = np.array(exps, dtype=float) if exps else np.zeros((0, nvars))
        self.c = np.array(coefs)
        self.ptr = np.array(ptr)
        self.nvars = nvars
        self.npolys = len(ptr) - 1

    def poly_values(self, x: np.ndarray) -> np.ndarray:
        if self.npolys == 0:
            return np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.c * np.prod(np.asarray(x, dtype=float) ** self.E, axis=1)
        sums = np.add.reduceat(np.append(terms, 0.0), self.ptr[:-1])
        sums[self.ptr[:-1] == self.ptr[1:]] = 0.0
        return sums[: self.npolys]

    def group_residuals(self, x: np.ndarray, group_norm: str) -> np.ndarray:
        vals = self.poly_values(x)
        out = np.empty(len(self.group_ptr) - 1)
        for i in range(len(out)):
            seg = vals[self.group_ptr[i]:self.group_ptr[i + 1]]
            out[i] = np.linalg.norm(seg) if group_norm == "l2" else np.max(np.abs(seg))
        return out


# --------------------------------------------------------------------------
# node relaxation
# --------------------------------------------------------------------------

def _node_program(sp: "_ScaledData", assign) -> tuple[ConicProgram, dict]:
    prob = sp.prob
    prog = ConicProgram()
    idx, w = _moment_frame(prog, prob.nvars, sp.order_r)
    _add_k_constraints(prog, w, idx, prob.order, sp.equalities, sp.inequalities,
                       sp.psd_constraints, sp.box)
    z_of: dict[int, int] = {}
    obj_ids, obj_vals = [], []
    for i, g in enumerate(sp.groups):
        a = assign[i]
        M = float(prob.big_m[i])
        if a is None:
            z = int(prog.add_nonneg(1)[0])
            prog.add_le([z], [1.0], 1.0, name=f"z{i}<=1")
            z_of[i] = z
            obj_ids.append(z)
            obj_vals.append(1.0)
        if prob.group_norm == "l2":
            u_rows = []
            for p in g:
                ids, vals = _riesz_sparse(p, idx, w)
                u_rows.append((ids, vals, 0.0))
            if a is None:
                prog.add_soc_constraint([z_of[i]], [M], prob.eps, u_rows,
                                        name=f"grp{i}")
            else:
                const = prob.eps + (M if a == 1 else 0.0)
                prog.add_soc_constraint([], [], const, u_rows, name=f"grp{i}")
        else:
            for pi, p in enumerate(g):
                ids, vals = _riesz_sparse(p, idx, w)
                rhs = prob.eps + (M if a == 1 else 0.0)
                if a is None:
                    prog.add_le(np.append(ids, z_of[i]), np.append(vals, -M),
                                rhs, name=f"grp{i}.{pi}+")
                    prog.add_le(np.append(ids, z_of[i]), np.append(-vals, -M),
                                rhs, name=f"grp{i}.{pi}-")
                else:
                    prog.add_le(ids, vals, rhs, name=f"grp{i}.{pi}+")
                    prog.add_le(ids, -np.asarray(vals), rhs, name=f"grp{i}.{pi}-")
    prog.set_objective(obj_ids, obj_vals)
    meta = {"idx": idx, "w": w, "z_of": z_of}
    return prog, meta


@dataclass
class _ScaledData:
    """Problem data rewritten in box-normalized variables, shared by all nodes."""

    prob: ConsensusProblem
    sigma: np.ndarray
    groups: list
    equalities: list
    inequalities: list
    psd_constraints: list
    box: Box | None
    order_r: int

    @staticmethod
    def build(prob: ConsensusProblem) -> "_ScaledData":
        sigma = np.ones(prob.nvars)
        if prob.box is not None:
            mag = np.maximum(np.abs(prob.box.lo), np.abs(prob.box.hi))
            ok = np.isfinite(mag) & (mag > 0)
            sigma[ok] = mag[ok]

        def sp(p):
            return scale_variables(p, sigma)

        degs = [p.degree for g in prob.groups for p in g]
        degs += [p.degree for p in prob.equalities + prob.inequalities]
        for pc in prob.psd_constraints:
            degs += [p.degree for row in pc.cells for p in row]
        if prob.box is not None:
            degs.append(2)
        order_r = max(1, (max(degs) + 1) // 2 + prob.order)
        box = None
        if prob.box is not None:
            box = Box(prob.box.lo / sigma, prob.box.hi / sigma)
        return _ScaledData(
            prob=prob, sigma=sigma,
            groups=[[sp(p) for p in g] for g in prob.groups],
            equalities=[sp(q) for q in prob.equalities],
            inequalities=[sp(p) for p in prob.inequalities],
            psd_constraints=[PsdPolyConstraint([[sp(p) for p in row] for row in pc.cells])
                             for pc in prob.psd_constraints],
            box=box, order_r=order_r)


@dataclass
class NodeRelaxation:
    feasible: bool
    bound: int
    zrel: tuple
    candidates: list  # candidate model points in original coordinates


def relaxed_node_bound(sp: "_ScaledData | ConsensusProblem", assign=None,
                       options: SolverOptions | None = None) -> NodeRelaxation:
    """Solve one node's SDP relaxation; the bound is valid for every
    completion of the partial assignment (infeasible nodes return +inf).

    Accepts either prepared scaled data or a raw problem (root node)."""
    if isinstance(sp, ConsensusProblem):
        sp = _ScaledData.build(sp)
    prob = sp.prob
    if assign is None:
        assign = (None,) * prob.m
    forced_out = sum(1 for a in assign if a == 1)
    opts = options or SolverOptions(feastol=prob.node_tol, abstol=prob.node_tol,
                                    reltol=prob.node_tol)
    prog, meta = _node_program(sp, assign)
    sol = prog.solve(opts)
    if sol.status == Status.INFEASIBLE:
        return NodeRelaxation(False, prob.m + 1, (), [])
    # the dual objective lower-bounds the relaxation value; back off by the
    # residual quality so imperfect node solves can never prune incorrectly
    quality = max(sol.pres, sol.dres)
    value = min(sol.objective, sol.dual_objective) - 10.0 * quality
    bound = forced_out + max(0, math.ceil(value - 1e-4))
    zrel = []
    for i in range(prob.m):
        if assign[i] is None:
            zrel.append(float(np.clip(sol.x[meta["z_of"][i]], 0.0, 1.0)))
        else:
            zrel.append(float(assign[i]))
    cands = []
    try:
        momvals = sol.value(meta["w"])
        for c in extraction_candidates(momvals, meta["idx"]):
            cands.append(c * sp.sigma)
    except Exception:
        pass
    return NodeRelaxation(True, bound, tuple(zrel), cands)


# --------------------------------------------------------------------------
# incumbent machinery
# --------------------------------------------------------------------------

class _Witness:
    """Verifies candidate model points and maintains the best assignment."""

    def __init__(self, prob: ConsensusProblem):
        self.prob = prob
        self.compiled = _CompiledGroups(prob.groups, prob.nvars)
        self.scalar_polys = [p for g in prob.groups for p in g]
        self.weighted_eqs = [q * 1e3 for q in prob.equalities]
        self._eq_batch = (PolyBatch(prob.equalities, prob.nvars)
                          if prob.equalities else None)
        self._gn_cache: dict[bytes, PolyBatch] = {}
        self.best_mask: np.ndarray | None = None
        self.best_count = -1
        self.best_x: np.ndarray | None = None

    def _gn_batch(self, mask: np.ndarray) -> PolyBatch:
        key = mask.tobytes()
        batch = self._gn_cache.get(key)
        if batch is None:
            polys = [p for i, g in enumerate(self.prob.groups) if mask[i] for p in g]
            if not polys:
                polys = self.scalar_polys
            batch = PolyBatch(polys + self.weighted_eqs, self.prob.nvars)
            self._gn_cache[key] = batch
        return batch

    def _k_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        p = self.prob
        for q in p.equalities:
            if abs(q(x)) > tol * (1.0 + q.coefficient_norm()):
                return False
        for pi in p.inequalities:
            if pi(x) < -tol * (1.0 + pi.coefficient_norm()):
                return False
        for pc in p.psd_constraints:
            M = np.array([[c(x) for c in row] for row in pc.cells])
            if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -tol * (1 + np.linalg.norm(M)):
                return False
        if p.box is not None:
            if np.any(x < p.box.lo - tol) or np.any(x > p.box.hi + tol):
                return False
        return True

    def classify(self, x: np.ndarray) -> np.ndarray:
        res = self.compiled.group_residuals(x, self.prob.group_norm)
        return res <= self.prob.eps * (1.0 + 1e-9) + 1e-12

    def _project_k(self, x: np.ndarray) -> np.ndarray:
        """Pull a point onto the equality manifold of K (small correction)."""
        if self._eq_batch is None:
            return x
        return gauss_newton_polish(self._eq_batch, x, iters=6)

    def offer(self, x: np.ndarray, forced_inliers=None) -> None:
        """Polish a candidate, classify, and fold into the incumbent.

        When the candidate comes from a node with forced inliers, those
        groups seed the first polish (they are what the node's relaxation
        actually fitted).  Equalities are weighted heavily in the polish so
        the refined point stays a legitimate K witness, and a final
        projection pass removes the leftover drift before classification."""
        if x is None or not np.all(np.isfinite(x)):
            return
        if self._k_feasible(x):
            self._consider(self.classify(x), x)
        mask0 = self.classify(x)
        if not np.any(mask0) and forced_inliers:
            mask0 = np.zeros(self.prob.m, dtype=bool)
            mask0[list(forced_inliers)] = True
        for attempt in range(3):
            xp = gauss_newton_polish(self._gn_batch(mask0), x, iters=10)
            xp = self._project_k(xp)
            mask1 = self.classify(xp)
            if self._k_feasible(xp):
                self._consider(mask1, xp)
            if np.array_equal(mask1, mask0):
                break
            mask0, x = mask1, xp

    def _consider(self, mask: np.ndarray, x: np.ndarray) -> None:
        count = int(np.sum(mask))
        if count > self.best_count or (
                count == self.best_count and self.best_mask is not None
                and _lex_smaller(mask, self.best_mask)):
            self.best_mask = mask.copy()
            self.best_count = count
            self.best_x = x.copy()

    def reverify(self, mask: np.ndarray) -> str:
        """Feasibility re-solve restricted to an assignment's inliers.

        Returns "refuted" when the restricted relaxation certifies that no
        point fits the masked groups within eps (its lower bound exceeds the
        threshold), "witnessed" when the extracted point actually passes all
        of them, and "unknown" otherwise; any usable point is folded into
        the incumbent along the way."""
        groups = [g for i, g in enumerate(self.prob.groups) if mask[i]]
        if not groups:
            return "witnessed"
        sub = NonMinimalProblem(
            nvars=self.prob.nvars, groups=groups, norm="linf",
            order=self.prob.order, equalities=list(self.prob.equalities),
            inequalities=list(self.prob.inequalities),
            psd_constraints=list(self.prob.psd_constraints),
            box=self.prob.box, tiebreak=list(self.prob.tiebreak))
        try:
            sol = solve_nonminimal(sub)
        except RelaxationInfeasibleError:
            return "refuted"
        except RelaxationUnboundedError:
            return "unknown"
        if sol.lower_bound > self.prob.eps * (1 + 1e-6) + 1e-9:
            return "refuted"
        self.offer(sol.x)
        if self.best_mask is not None and np.all(self.best_mask[mask]):
            return "witnessed"
        if self._k_feasible(sol.x) and np.all(self.classify(sol.x)[mask]):
            return "witnessed"
        return "unknown"


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    for x, y in zip(a, b):
        if x != y:
            return bool(x > y)  # inlier (True) first means lexicographically smaller mask of outliers
    return False


# --------------------------------------------------------------------------
# the branch-and-bound driver
# --------------------------------------------------------------------------

def maximize_consensus(prob: ConsensusProblem,
                       options: SolverOptions | None = None) -> ConsensusResult:
    """Best-first big-M branch-and-bound over inlier/outlier assignments."""
    t0 = time.monotonic()
    m = prob.m
    sp = _ScaledData.build(prob)
    witness = _Witness(prob)

    root = relaxed_node_bound(sp, (None,) * m, options)
    if not root.feasible:
        return ConsensusResult(np.zeros(m, dtype=bool), 0, False, m, None,
                               "infeasible", 1, [])
    for c in root.candidates:
        witness.offer(c)
    if witness.best_mask is not None:
        witness.reverify(witness.best_mask)

    # heap order: bound first (best-first), deeper nodes preferred on ties so
    # consistent forced-inlier sets are grown quickly into strong incumbents,
    # then insertion order (inlier child first) for determinism
    seq = 0
    heap: list = []
    heapq.heappush(heap, (root.bound, 0, seq, BnbNode((None,) * m, root.bound, 0,
                                                      root.zrel)))
    nodes = 1
    trace: list[TraceEntry] = []
    limit_hit = False
    iteration = 0
    # leaves that were relaxation-feasible but never produced a witness keep
    # the certificate honest: their bound stays part of the global bound
    unverified_leaf = m + 1

    def best_out() -> int:
        return m - witness.best_count if witness.best_count >= 0 else m + 1

    def global_lower() -> int:
        open_b = min((h[0] for h in heap), default=m + 1)
        return min(open_b, unverified_leaf)

    def record():
        optimistic = max(m - global_lower(), max(witness.best_count, 0))
        trace.append(TraceEntry(iteration, max(witness.best_count, 0),
                                optimistic, len(heap),
                                time.monotonic() - t0))

    record()
    while heap:
        if nodes >= prob.node_limit:
            limit_hit = True
            break
        if prob.time_limit is not None and time.monotonic() - t0 > prob.time_limit:
            limit_hit = True
            break
        bound, negdepth, tiebreak_seq, node = heapq.heappop(heap)
        if bound >= best_out():
            heapq.heappush(heap, (bound, negdepth, tiebreak_seq, node))
            break
        free = [i for i, a in enumerate(node.assign) if a is None]
        if not free:
            # feasible leaf still unbeaten: witness it, refute it, or track it
            forced_mask = np.array([a == 0 for a in node.assign])
            outcome = witness.reverify(forced_mask)
            if outcome != "refuted" and bound < best_out():
                unverified_leaf = min(unverified_leaf, bound)
            continue
        # most-fractional branch variable, ties to the lowest index
        fr = [(abs(node.zrel[i] - 0.5), i) for i in free]
        _, bvar = min(fr)
        iteration += 1
        for val in (0, 1):  # inlier branch first
            child_assign = list(node.assign)
            child_assign[bvar] = val
            child_assign = tuple(child_assign)
            rel = relaxed_node_bound(sp, child_assign, options)
            nodes += 1
            if not rel.feasible:
                continue
            forced_in = [i for i, a in enumerate(child_assign) if a == 0]
            improved = False
            for c in rel.candidates:
                before = witness.best_count
                witness.offer(c, forced_inliers=forced_in)
                improved = improved or witness.best_count > before
            if improved and witness.best_mask is not None:
                witness.reverify(witness.best_mask)
            child_bound = max(rel.bound, node.bound)
            if child_bound < best_out():
                seq += 1
                heapq.heappush(heap, (child_bound, -(node.depth + 1), seq,
                                      BnbNode(child_assign, child_bound,
                                              node.depth + 1, rel.zrel)))
        record()

    if witness.best_mask is None:
        # K is feasible but no witness was ever verified: report honestly
        return ConsensusResult(np.zeros(m, dtype=bool), 0, False, m, None,
                               "limit", nodes, trace)
    certified = (not limit_hit) and best_out() <= global_lower()
    optimistic = witness.best_count if certified else max(m - global_lower(),
                                                          witness.best_count)
    gap = max(0, optimistic - witness.best_count)
    trace.append(TraceEntry(iteration + 1, witness.best_count, optimistic,
                            len(heap), time.monotonic() - t0))
    return ConsensusResult(
        inlier_mask=witness.best_mask, inlier_count=witness.best_count,
        certified=certified, gap=0 if certified else gap,
        x=witness.best_x, status="certified" if certified else "limit",
        nodes=nodes, trace=trace)


# --------------------------------------------------------------------------
# exhaustive reference (for small m)
# --------------------------------------------------------------------------

def consensus_brute_force(prob: ConsensusProblem, max_m: int = 12) -> ConsensusResult:
    """Enumerate all 2^m assignments, largest inlier sets first; each is
    tested by a restricted feasibility solve plus witness verification."""
    import itertools
    m = prob.m
    if m > max_m:
        raise ValueError(f"brute force limited to m <= {max_m}")
    witness = _Witness(prob)
    for size in range(m, 0, -1):
        hits = []
        for keep in itertools.combinations(range(m), size):
            mask = np.zeros(m, dtype=bool)
            mask[list(keep)] = True
            groups = [g for i, g in enumerate(prob.groups) if mask[i]]
            sub = NonMinimalProblem(
                nvars=prob.nvars, groups=groups, norm="linf", order=prob.order,
                equalities=list(prob.equalities),
                inequalities=list(prob.inequalities),
                psd_constraints=list(prob.psd_constraints),
                box=prob.box, tiebreak=list(prob.tiebreak))
            try:
                sol = solve_nonminimal(sub)
            except RelaxationInfeasibleError:
                continue
            if sol.lower_bound > prob.eps * (1 + 1e-6) + 1e-9:
                continue  # certified infeasible at this assignment
            witness.offer(sol.x)
            if witness.best_count >= size:
                hits.append(mask)
        if witness.best_count >= size:
            break
    mask = witness.best_mask if witness.best_mask is not None else np.zeros(m, bool)
    return ConsensusResult(mask, max(witness.best_count, 0), True, 0,
                           witness.best_x, "certified", 2 ** m, [])
