"""Block-structured conic program modeling layer.

A ConicProgram owns scalar decision variables (free or nonnegative), PSD
matrix blocks, second-order-cone blocks, and linear equality / inequality
constraints over all of them.  Matrix inequalities (an affine matrix
expression required PSD) and affine second-order-cone constraints are the
slacked forms of those same primitives: each is an equality against a fresh
cone block, which is exactly how they are lowered to the internal solver.

The solver form is  min c'x : Gx + s = h, Ax = b, s in K  with x covering
every scalar variable; declared PSD/SOC blocks keep their cells as scalar
variables mirrored into the cone through an identity matrix inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import Dims, SQRT2, svec
from .solver import RawSolution, SolverOptions, Status, solve_conelp


@dataclass(frozen=True)
class PsdVar:
    """Handle to a declared PSD matrix block; cells are scalar variable ids."""

    name: str
    side: int
    ids: np.ndarray  # upper-triangular cell ids, row-major (i <= j)

    def cell(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        # row-major upper triangle offset
        return int(self.ids[i * self.side - i * (i - 1) // 2 + (j - i)])


@dataclass
class LinearConstraint:
    sense: str  # "eq" or "le"
    ids: np.ndarray
    vals: np.ndarray
    rhs: float
    name: str = ""


@dataclass
class MatrixInequality:
    """const + sum_v x_v * basis_v  >=  0 (PSD), entries given as COO cells."""

    side: int
    entries: list  # (i, j, var_id, coef) with i <= j meaning the (i,j)=(j,i) cell
    const: np.ndarray
    name: str = ""


@dataclass
class SocConstraint:
    """||u(x)||_2 <= t(x) with affine t and u entries."""

    t_ids: np.ndarray
    t_vals: np.ndarray
    t_const: float
    u_rows: list  # list of (ids, vals, const)
    name: str = ""


@dataclass
class FeasibilityReport:
    ok: bool
    worst_violation: float
    worst_label: str

    def __bool__(self):
        return self.ok


class ConicProgram:
    """Conic program builder and solver front-end."""

    def __init__(self):
        self.n_scalars = 0
        self.nonneg_ids: list[int] = []
        self.psd_vars: list[PsdVar] = []
        self.soc_vars: list[np.ndarray] = []
        self.constraints: list[LinearConstraint] = []
        self.lmis: list[MatrixInequality] = []
        self.socs: list[SocConstraint] = []
        self.obj_ids = np.zeros(0, dtype=int)
        self.obj_vals = np.zeros(0)
        self.obj_const = 0.0
        self.meta: dict = {}

    # -- variables ----------------------------------------------------------

    def add_free(self, count: int = 1) -> np.ndarray:
        ids = np.arange(self.n_scalars, self.n_scalars + count)
        self.n_scalars += count
        return ids

    def add_nonneg(self, count: int = 1) -> np.ndarray:
        ids = self.add_free(count)
        self.nonneg_ids.extend(int(i) for i in ids)
        return ids

    def add_psd_var(self, side: int, name: str = "") -> PsdVar:
        m = side * (side + 1) // 2
        ids = self.add_free(m)
        var = PsdVar(name or f"psd{len(self.psd_vars)}", side, ids)
        self.psd_vars.append(var)
        return var

    def add_soc_var(self, dim: int) -> np.ndarray:
        ids = self.add_free(dim)
        self.soc_vars.append(ids)
        return ids

    # -- constraints ---------------------------------------------------------

    def add_eq(self, ids, vals, rhs: float = 0.0, name: str = ""):
        self.constraints.append(LinearConstraint(
            "eq", np.asarray(ids, dtype=int), np.asarray(vals, dtype=float),
            float(rhs), name))

    def add_le(self, ids, vals, rhs: float, name: str = ""):
        self.constraints.append(LinearConstraint(
            "le", np.asarray(ids, dtype=int), np.asarray(vals, dtype=float),
            float(rhs), name))

    def add_ge(self, ids, vals, rhs: float, name: str = ""):
        self.add_le(ids, -np.asarray(vals, dtype=float), -float(rhs), name)

    def add_lmi(self, side: int, entries, const: np.ndarray | None = None, name: str = ""):
        C = np.zeros((side, side)) if const is None else np.asarray(const, dtype=float)
        norm = []
        for (i, j, vid, coef) in entries:
            if i > j:
                i, j = j, i
            norm.append((int(i), int(j), int(vid), float(coef)))
        self.lmis.append(MatrixInequality(side, norm, C, name))

    def add_soc_constraint(self, t_ids, t_vals, t_const, u_rows, name: str = ""):
        rows = [(np.asarray(i, dtype=int), np.asarray(v, dtype=float), float(c))
                for (i, v, c) in u_rows]
        self.socs.append(SocConstraint(
            np.asarray(t_ids, dtype=int), np.asarray(t_vals, dtype=float),
            float(t_const), rows, name))

    def set_objective(self, ids, vals, const: float = 0.0):
        self.obj_ids = np.asarray(ids, dtype=int)
        self.obj_vals = np.asarray(vals, dtype=float)
        self.obj_const = float(const)

    # -- lowering -------------------------------------------------------------

    def _lower(self):
        n = self.n_scalars
        c = np.zeros(n)
        np.add.at(c, self.obj_ids, self.obj_vals)

        eq_rows = [cn for cn in self.constraints if cn.sense == "eq"]
        le_rows = [cn for cn in self.constraints if cn.sense == "le"]

        A = np.zeros((len(eq_rows), n))
        b = np.zeros(len(eq_rows))
        for r, cn in enumerate(eq_rows):
            np.add.at(A[r], cn.ids, cn.vals)
            b[r] = cn.rhs

        l = len(self.nonneg_ids) + len(le_rows)
        q_dims = [len(ids) for ids in self.soc_vars] + \
                 [1 + len(sc.u_rows) for sc in self.socs]
        s_dims = [v.side for v in self.psd_vars] + [m.side for m in self.lmis]
        dims = Dims(l, tuple(q_dims), tuple(s_dims))

        G = np.zeros((dims.cone_dim, n))
        h = np.zeros(dims.cone_dim)
        row = 0
        for vid in self.nonneg_ids:          # s = x_vid >= 0
            G[row, vid] = -1.0
            row += 1
        for cn in le_rows:                    # s = rhs - a'x >= 0
            np.add.at(G[row], cn.ids, cn.vals)
            h[row] = cn.rhs
            row += 1
        for ids in self.soc_vars:             # s = (t, u) itself
            for o, vid in enumerate(ids):
                G[row + o, vid] = -1.0
            row += len(ids)
        for sc in self.socs:                  # s = (t(x), u(x))
            np.add.at(G[row], sc.t_ids, -sc.t_vals)
            h[row] = sc.t_const
            row += 1
            for (ids, vals, const) in sc.u_rows:
                np.add.at(G[row], ids, -vals)
                h[row] = const
                row += 1
        for var in self.psd_vars:             # s = svec(X) with X the mirror cells
            side = var.side
            kk = 0
            for i in range(side):
                for j in range(i, side):
                    scale = 1.0 if i == j else SQRT2
                    G[row, var.cell(i, j)] = -scale
                    kk += 1
                    row += 1
        for mi in self.lmis:                  # s = svec(C + sum x_v E_v)
            side = mi.side
            idx_of = {}
            kk = 0
            for i in range(side):
                for j in range(i, side):
                    idx_of[(i, j)] = row + kk
                    h[row + kk] = mi.const[i, j] * (1.0 if i == j else SQRT2)
                    kk += 1
            for (i, j, vid, coef) in mi.entries:
                scale = 1.0 if i == j else SQRT2
                G[idx_of[(i, j)], vid] -= coef * scale
            row += kk
        assert row == dims.cone_dim

        # equilibrate: scale eq rows individually and cone blocks uniformly
        # (per-row scaling would not preserve SOC/PSD membership)
        for r in range(A.shape[0]):
            sc = max(np.max(np.abs(A[r])), abs(b[r]))
            if sc > 0:
                A[r] /= sc
                b[r] /= sc
        for r in range(dims.l):
            sc = max(np.max(np.abs(G[r])) if n else 0.0, abs(h[r]))
            if sc > 0:
                G[r] /= sc
                h[r] /= sc
        blk_list = []
        for boff, d, cnt in dims.soc_runs():
            for i in range(cnt):
                blk_list.append((boff + i * d, d))
        for boff, length, _side in dims.psd_blocks():
            blk_list.append((boff, length))
        for boff, length in blk_list:
            blk = slice(boff, boff + length)
            sc = max(float(np.max(np.abs(G[blk]))) if n else 0.0,
                     float(np.max(np.abs(h[blk]))))
            if sc > 0:
                G[blk] /= sc
                h[blk] /= sc
        return c, G, h, A, b, dims

    # -- solving ---------------------------------------------------------------

    def solve(self, options: SolverOptions | None = None) -> "ConicSolution":
        c, G, h, A, b, dims = self._lower()
        raw = solve_conelp(c, G, h, A, b, dims, options)
        return ConicSolution(self, raw)

    # -- feasibility checking ----------------------------------------------------

    def feasible(self, point: np.ndarray, tol: float = 1e-7) -> FeasibilityReport:
        """Check a full scalar assignment against every constraint.

        Returns the worst violation and its label; cone memberships are
        checked with a relative tolerance on the block scale.
        """
        x = np.asarray(point, dtype=float)
        if x.shape != (self.n_scalars,):
            raise ValueError(
                f"point has shape {x.shape}, expected ({self.n_scalars},)")
        worst, label = 0.0, "none"

        def track(v: float, lab: str):
            nonlocal worst, label
            if v > worst:
                worst, label = v, lab

        for cn in self.constraints:
            val = float(x[cn.ids] @ cn.vals)
            scale = 1.0 + abs(cn.rhs)
            if cn.sense == "eq":
                track(abs(val - cn.rhs) / scale, f"eq:{cn.name}")
            else:
                track((val - cn.rhs) / scale, f"le:{cn.name}")
        for vid in self.nonneg_ids:
            track(-x[vid], f"nonneg:{vid}")
        for var in self.psd_vars:
            M = self.psd_value_from(x, var)
            scale = 1.0 + float(np.linalg.norm(M))
            track(-float(np.min(np.linalg.eigvalsh(M))) / scale, f"psd:{var.name}")
        for ids in self.soc_vars:
            u = x[ids]
            track(float(np.linalg.norm(u[1:]) - u[0]) / (1.0 + abs(u[0])), "socvar")
        for mi in self.lmis:
            M = mi.const.copy()
            for (i, j, vid, coef) in mi.entries:
                M[i, j] += coef * x[vid]
                if i != j:
                    M[j, i] += coef * x[vid]
            scale = 1.0 + float(np.linalg.norm(M))
            track(-float(np.min(np.linalg.eigvalsh(M))) / scale, f"lmi:{mi.name}")
        for sc in self.socs:
            t = float(x[sc.t_ids] @ sc.t_vals) + sc.t_const
            u = np.array([float(x[i] @ v) + cc for (i, v, cc) in sc.u_rows])
            track((float(np.linalg.norm(u)) - t) / (1.0 + abs(t)), f"soc:{sc.name}")
        return FeasibilityReport(worst <= tol, worst, label)

    @staticmethod
    def psd_value_from(x: np.ndarray, var: PsdVar) -> np.ndarray:
        M = np.zeros((var.side, var.side))
        for i in range(var.side):
            for j in range(i, var.side):
                M[i, j] = M[j, i] = x[var.cell(i, j)]
        return M

    # -- debug dump ----------------------------------------------------------------

    def dump_json(self) -> dict:
        """Documented debug schema for cross-checking against external solvers."""
        return {
            "n_scalars": self.n_scalars,
            "nonneg_ids": list(self.nonneg_ids),
            "psd_blocks": [{"name": v.name, "side": v.side, "ids": v.ids.tolist()}
                           for v in self.psd_vars],
            "soc_blocks": [ids.tolist() for ids in self.soc_vars],
            "objective": {"ids": self.obj_ids.tolist(),
                          "vals": self.obj_vals.tolist(),
                          "const": self.obj_const},
            "constraints": [{"sense": cn.sense, "ids": cn.ids.tolist(),
                             "vals": cn.vals.tolist(), "rhs": cn.rhs,
                             "name": cn.name} for cn in self.constraints],
            "matrix_inequalities": [{"side": mi.side, "entries": mi.entries,
                                     "const": mi.const.tolist(), "name": mi.name}
                                    for mi in self.lmis],
            "soc_constraints": [{"t_ids": sc.t_ids.tolist(),
                                 "t_vals": sc.t_vals.tolist(),
                                 "t_const": sc.t_const,
                                 "u_rows": [{"ids": i.tolist(), "vals": v.tolist(),
                                             "const": cc} for (i, v, cc) in sc.u_rows],
                                 "name": sc.name} for sc in self.socs],
        }


class ConicSolution:
    """Primal-dual solution with residual-certified status."""

    def __init__(self, prog: ConicProgram, raw: RawSolution):
        self.prog = prog
        self.raw = raw
        self.status = raw.status
        self.x = raw.x
        self.iterations = raw.iterations
        self.gap = raw.gap
        self.relgap = raw.relgap
        self.pres = raw.pres
        self.dres = raw.dres
        self.objective = (float(raw.pobj) + prog.obj_const
                          if raw.status == Status.OPTIMAL else float(raw.pobj) + prog.obj_const)
        self.dual_objective = float(raw.dobj) + prog.obj_const
        self.trace = raw.trace

    def value(self, ids) -> np.ndarray:
        return self.x[np.asarray(ids, dtype=int)]

    def psd_value(self, var: PsdVar) -> np.ndarray:
        return ConicProgram.psd_value_from(self.x, var)

    def __repr__(self):
        return (f"ConicSolution(status={self.status.value}, obj={self.objective:.6g}, "
                f"gap={self.gap:.2e}, iters={self.iterations})")
