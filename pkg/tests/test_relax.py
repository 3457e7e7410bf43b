import numpy as np
import pytest

from momenta.moment import moment_index
from momenta.poly import Polynomial
from momenta.relax import (Box, ExtractionDegenerateError, NonMinimalProblem,
                           Pop, PsdPolyConstraint, RelaxationInfeasibleError,
                           extract_from_matrix, extract_point, lasserre_relax,
                           nonminimal_program, scale_problem, shor_relax,
                           solve_nonminimal, solve_pop, variable_scales)
from momenta.sdp import Status


def x_(n, j):
    return Polynomial.variable(n, j)


def grid_min(polys, lo, hi, res=301, refine=41):
    """Two-stage grid search: coarse global pass then a fine local pass.

    Every grid value upper-bounds the true minimum, so a relaxation bound
    must stay below the returned value."""
    n = polys[0].nvars if isinstance(polys, list) else polys.nvars
    obj = polys if isinstance(polys, Polynomial) else None

    def total(X):
        if obj is not None:
            return obj.eval_many(X)
        return sum(np.abs(p.eval_many(X)) for p in polys)

    axes = [np.linspace(lo, hi, res) for _ in range(n)]
    X = np.array(np.meshgrid(*axes)).reshape(n, -1).T
    vals = total(X)
    best = X[np.argmin(vals)]
    span = (hi - lo) / (res - 1)
    axes = [np.linspace(max(lo, b - span), min(hi, b + span), refine)
            for b in best]
    X2 = np.array(np.meshgrid(*axes)).reshape(n, -1).T
    vals2 = total(X2)
    i = np.argmin(vals2)
    return float(vals2[i]), X2[i]


class TestShor:
    def test_convex_instance_exact(self):
        x = x_(1, 0)
        pop = Pop(1, x * x, inequalities=[x - 1])
        sol = shor_relax(pop).solve()
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_trust_region_tight(self):
        x1, x2 = x_(2, 0), x_(2, 1)
        pop = Pop(2, -(x1 * x1) - (x2 * x2),
                  inequalities=[1 - x1 * x1 - x2 * x2])
        sol = shor_relax(pop).solve()
        assert sol.objective == pytest.approx(-1.0, abs=1e-6)

    def test_degree_guard(self):
        x = x_(1, 0)
        with pytest.raises(ValueError):
            shor_relax(Pop(1, x * x * x))

    def test_random_qcqp_lower_bound(self, rng):
        # relaxation optimum must lower-bound a grid search over the box
        for trial in range(4):
            terms = {}
            basis = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
            for e in basis:
                terms[e] = rng.uniform(-1, 1)
            obj = Polynomial(2, terms)
            cons = [Polynomial(2, {(0, 0): 1.0, (2, 0): -1.0}),
                    Polynomial(2, {(0, 0): 1.0, (0, 2): -1.0}),
                    Polynomial(2, {(0, 0): rng.uniform(0.5, 2.0),
                                   (1, 0): rng.uniform(-1, 1),
                                   (0, 1): rng.uniform(-1, 1)})]
            pop = Pop(2, obj, inequalities=cons)
            sol = shor_relax(pop).solve()
            gmin, gx = grid_min(obj, -1.0, 1.0)
            feas = all(c(gx) >= -1e-9 for c in cons)
            if feas:
                assert sol.objective <= gmin + 1e-6


class TestLasserre:
    def test_s0_matches_shor(self, rng):
        for _ in range(4):
            terms = {e: rng.uniform(-1, 1)
                     for e in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}
            obj = Polynomial(2, terms)
            box_cons = [Polynomial(2, {(0, 0): 1.0, (2, 0): -1.0}),
                        Polynomial(2, {(0, 0): 1.0, (0, 2): -1.0})]
            pop = Pop(2, obj, inequalities=box_cons)
            a = shor_relax(pop).solve().objective
            b = lasserre_relax(pop, 0).solve().objective
            assert a == pytest.approx(b, abs=1e-6)

    def test_double_well(self):
        x = x_(1, 0)
        g = x * x - 1
        pop = Pop(1, g * g, inequalities=[x + 2, 2 - x])
        sol = solve_pop(pop, s=1)
        assert sol.objective == pytest.approx(0.0, abs=1e-6)
        assert abs(abs(sol.x[0]) - 1.0) <= 1e-3

    def test_bivariate_quartic_bound(self, rng):
        for _ in range(3):
            idx = moment_index(2, 2)
            terms = {m: rng.uniform(-1, 1) for m in idx.momvars}
            obj = Polynomial(2, terms)
            cons = [Polynomial(2, {(0, 0): 9.0, (2, 0): -1.0}),
                    Polynomial(2, {(0, 0): 9.0, (0, 2): -1.0})]
            pop = Pop(2, obj, inequalities=cons)
            sol = solve_pop(pop, s=1, polish=False, purify=False)
            gmin, _ = grid_min(obj, -3.0, 3.0)
            assert sol.lower_bound <= gmin + 1e-6

    def test_hierarchy_monotone(self, rng):
        x = x_(1, 0)
        g = x * x - 1
        pop = Pop(1, g * g + 0.3 * x, inequalities=[x + 2, 2 - x])
        vals = [lasserre_relax(pop, s).solve().objective for s in (0, 1, 2)]
        for a, b in zip(vals, vals[1:]):
            assert b >= a - 1e-6


class TestNonMinimal:
    def test_l1_median(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1], [x - 3]], norm="l1")
        sol = solve_nonminimal(prob)
        assert sol.objective == pytest.approx(2.0, abs=1e-6)
        assert 1.0 - 1e-6 <= sol.x[0] <= 3.0 + 1e-6

    def test_linf_midpoint(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1], [x - 3]], norm="linf")
        sol = solve_nonminimal(prob)
        assert sol.objective == pytest.approx(1.0, abs=1e-6)
        assert sol.x[0] == pytest.approx(2.0, abs=1e-5)

    def test_l1_at_least_linf(self, rng):
        x = x_(1, 0)
        groups = [[x - float(v)] for v in rng.uniform(-2, 2, 5)]
        l1 = solve_nonminimal(NonMinimalProblem(1, groups, norm="l1"))
        li = solve_nonminimal(NonMinimalProblem(1, groups, norm="linf"))
        assert l1.objective >= li.objective - 1e-6

    def test_l2_groups_require_grouping(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1, x + 1]], norm="l2")
        sol = solve_nonminimal(prob)
        # min over x of ||(x-1, x+1)|| is sqrt(2) at x = 0
        assert sol.objective == pytest.approx(np.sqrt(2.0), abs=1e-6)
        assert sol.x[0] == pytest.approx(0.0, abs=1e-5)

    def test_reported_residuals_match_eval(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1], [x - 3]], norm="l1")
        sol = solve_nonminimal(prob)
        for r, p in zip(sol.residuals, prob.scalar_polys):
            assert r == pytest.approx(abs(p(sol.x)), abs=1e-10)

    def test_infeasible_k_raises(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x]], norm="l1",
                                 equalities=[x - 1.0, x + 1.0])
        with pytest.raises(RelaxationInfeasibleError):
            solve_nonminimal(prob)

    def test_box_and_psd_constraints_build(self):
        x1, x2 = x_(2, 0), x_(2, 1)
        pc = PsdPolyConstraint([[x1, x2], [x2, Polynomial.constant(2, 1.0)]])
        prob = NonMinimalProblem(2, [[x1 - 1]], norm="l1",
                                 psd_constraints=[pc],
                                 box=Box([-2.0, -2.0], [2.0, 2.0]))
        sol = solve_nonminimal(prob)
        assert sol.status == "optimal"
        # omega(x) must come out PSD at the solution
        M = np.array([[sol.x[0], sol.x[1]], [sol.x[1], 1.0]])
        assert np.linalg.eigvalsh(M)[0] >= -1e-6

    def test_json_round_trip(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1], [x - 3]], norm="l2", order=1,
                                 box=Box([-4.0], [4.0]), tiebreak=[x])
        back = NonMinimalProblem.from_json(prob.to_json())
        assert back.norm == "l2" and back.order == 1
        assert back.groups[0][0].terms == prob.groups[0][0].terms
        assert np.allclose(back.box.lo, prob.box.lo)

    def test_trace_residual_form_matches_scalar_at_s0(self):
        x = x_(1, 0)
        a = solve_nonminimal(NonMinimalProblem(
            1, [[x - 1], [x - 3]], norm="l1", order=0, residual_form="scalar"))
        b = solve_nonminimal(NonMinimalProblem(
            1, [[x - 1], [x - 3]], norm="l1", order=0, residual_form="trace"))
        assert a.objective == pytest.approx(b.objective, abs=1e-6)

    def test_trace_residual_form_solves_at_s1(self):
        x = x_(1, 0)
        prob = NonMinimalProblem(1, [[x - 1], [x - 3]], norm="l1", order=1,
                                 box=Box([-5.0], [5.0]),
                                 residual_form="trace")
        sol = solve_nonminimal(prob)
        # trace form bounds L(p * (1 + x^2)); the minimizer stays in [1, 3]
        assert 1.0 - 1e-4 <= sol.x[0] <= 3.0 + 1e-4


class TestScaling:
    def test_residual_values_invariant(self, rng):
        x1, x2 = x_(2, 0), x_(2, 1)
        prob = NonMinimalProblem(
            2, [[x1 * x1 - 3 * x2], [x2 - 5.0]], norm="l1",
            box=Box([-10.0, -100.0], [10.0, 100.0]))
        sigma = variable_scales(prob)
        scaled = scale_problem(prob, sigma)
        for _ in range(5):
            y = rng.uniform(-1, 1, 2)
            for p, q in zip(prob.scalar_polys, scaled.scalar_polys):
                assert q(y) == pytest.approx(p(sigma * y), rel=1e-12)


class TestExtraction:
    def test_exact_rank_one(self):
        xstar = np.array([2.0, -1.0])
        z = np.concatenate([[1.0], xstar])
        x, gap = extract_from_matrix(np.outer(z, z))
        assert np.allclose(x, xstar, atol=1e-12)
        assert gap == pytest.approx(0.0, abs=1e-12)

    def test_identity_maximally_ambiguous(self):
        x, gap = extract_from_matrix(np.eye(3))
        assert gap == pytest.approx(1.0)
        assert np.allclose(x, [0.0, 0.0])

    def test_degenerate_raises(self):
        Y = np.diag([1e-12, 1.0, 1.0])
        with pytest.raises(ExtractionDegenerateError):
            extract_from_matrix(Y)

    def test_extract_point_uses_leading_block(self):
        idx = moment_index(2, 2)
        xstar = np.array([0.3, -0.8])
        mom = idx.point_mass(xstar)
        x, gap = extract_point(mom, idx)
        assert np.allclose(x, xstar, atol=1e-10)
        assert gap <= 1e-12

    def test_extraction_consistency_when_tight(self):
        # tight solve: constraint violations at the extracted point stay small
        x = x_(1, 0)
        pop = Pop(1, x * x, inequalities=[x - 1])
        sol = solve_pop(pop, s=0)
        assert sol.rank_gap <= 1e-6
        assert (sol.x[0] - 1.0) >= -1e-5


class TestLowerBoundProperty:
    def test_random_feasible_points_dominate_bound(self, rng):
        x1, x2 = x_(2, 0), x_(2, 1)
        obj = x1 * x1 + 0.5 * (x2 * x2) + x1 * x2 + 0.3 * x1
        cons = [Polynomial(2, {(0, 0): 4.0, (2, 0): -1.0}),
                Polynomial(2, {(0, 0): 4.0, (0, 2): -1.0})]
        pop = Pop(2, obj, inequalities=cons)
        bound = shor_relax(pop).solve().objective
        pts = rng.uniform(-2, 2, (100, 2))
        vals = obj.eval_many(pts)
        assert np.all(vals >= bound - 1e-6)
