"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here, not configurable; run with ``pytest -s`` to see
the per-criterion lines.
"""

import json
import time

import numpy as np
import pytest

from momenta.consensus import (ConsensusProblem, consensus_brute_force,
                               maximize_consensus)
from momenta.poly import Polynomial
from momenta.relax import (Box, NonMinimalProblem, Pop,
                           RelaxationUnboundedError, solve_nonminimal,
                           solve_pop)
from momenta.sdp import ConicProgram, Status
from momenta.vision.autocalib import (autocalib_consensus_problem,
                                      autocalib_problem, calibration_errors,
                                      recover_K, synth_fundamentals)
from momenta.vision.nrsfm import nrsfm_problem, synth_quartic_system
from momenta.vision.rigid import (estimate_rigid, rigid_consensus_problem,
                                  rotation_angle_deg, synth_rigid)

from test_relax import grid_min


def report(num, ok, detail):
    print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


class TestCriterion1:
    def test_shor_tightness_noiseless_rigid(self):
        """50 seeds, 10 exact points: rotation <= 1e-4 deg, translation
        <= 1e-5, rank gap <= 1e-6, runtime <= 1 s per instance."""
        worst = {"rot": 0.0, "tr": 0.0, "gap": 0.0, "time": 0.0}
        for seed in range(50):
            corrs, gt = synth_rigid(10, 0.0, 0.0, seed)
            t0 = time.perf_counter()
            est, sol = estimate_rigid(corrs)
            dt = time.perf_counter() - t0
            worst["rot"] = max(worst["rot"], rotation_angle_deg(est.R, gt.R))
            worst["tr"] = max(worst["tr"], float(np.linalg.norm(est.t - gt.t)))
            worst["gap"] = max(worst["gap"], sol.rank_gap)
            worst["time"] = max(worst["time"], dt)
        ok = (worst["rot"] <= 1e-4 and worst["tr"] <= 1e-5
              and worst["gap"] <= 1e-6 and worst["time"] <= 1.0)
        report(1, ok, f"worst over 50 seeds: rot {worst['rot']:.2e} deg, "
                      f"trans {worst['tr']:.2e}, rank_gap {worst['gap']:.2e}, "
                      f"time {worst['time']:.2f}s")


class TestCriterion2:
    def test_minimal_case_noise_continuity(self):
        """3-point solves across sigma in [0, 5%]: median errors grow
        monotonically and continuously from zero (100 trials per level)."""
        levels = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
        medians = []
        for noise in levels:
            rots = []
            for trial in range(100):
                corrs, gt = synth_rigid(3, noise, 0.0, 1000 + trial)
                est, sol = estimate_rigid(corrs)
                rots.append(rotation_angle_deg(est.R, gt.R))
            medians.append(float(np.median(rots)))
        start_zero = medians[0] <= 1e-5
        monotone = all(b >= a - 1e-9 for a, b in zip(medians, medians[1:]))
        continuous = medians[1] <= 5.0  # no jump: ~1% noise stays small
        ok = start_zero and monotone and continuous
        report(2, ok, "median rot err by noise level: "
                      + ", ".join(f"{m:.3f}" for m in medians))


class TestCriterion3:
    def test_consensus_exactness_rigid(self):
        """Planted 10+20 instances: certified exact mask on >= 95% of 20
        seeds within 5000 nodes; brute-force agreement for small m."""
        hits, max_nodes = 0, 0
        for seed in range(20):
            corrs, gt = synth_rigid(30, 0.01, 2.0 / 3.0, seed)
            eps = 3.0 * np.sqrt(3.0) * gt.noise_sigma_abs
            prob = rigid_consensus_problem(corrs, eps, node_limit=5000)
            res = maximize_consensus(prob)
            max_nodes = max(max_nodes, res.nodes)
            if res.certified and np.array_equal(res.inlier_mask, gt.inlier_mask):
                hits += 1
        ok_planted = hits >= 19 and max_nodes <= 5000

        # exhaustive check against 2^m enumeration
        agree = 0
        total = 0
        x = Polynomial.variable(1, 0)
        for seed in range(2):
            rng = np.random.default_rng(seed)
            vals = np.concatenate([2.0 + rng.normal(0, 0.02, 5),
                                   rng.uniform(6, 14, 3)])
            prob = ConsensusProblem(1, [[x - float(v)] for v in vals],
                                    eps=0.1, box=Box([-20.0], [20.0]))
            bnb = maximize_consensus(prob)
            ref = consensus_brute_force(prob)
            total += 1
            agree += int(bnb.inlier_count == ref.inlier_count and bnb.certified)
        corrs, gt = synth_rigid(7, 0.01, 2.0 / 7.0, 3)
        eps = 3.0 * np.sqrt(3.0) * gt.noise_sigma_abs
        prob = rigid_consensus_problem(corrs, eps)
        bnb = maximize_consensus(prob)
        ref = consensus_brute_force(prob)
        total += 1
        agree += int(bnb.inlier_count == ref.inlier_count and bnb.certified)
        ok = ok_planted and agree == total
        report(3, ok, f"planted mask certified on {hits}/20 seeds "
                      f"(max nodes {max_nodes}); brute-force agreement "
                      f"{agree}/{total}")


class TestCriterion4:
    def test_consensus_exactness_autocalib(self):
        """5 inlier + 5 outlier fundamental matrices: certified exact
        planted mask on >= 95% of 20 seeds."""
        hits = 0
        for seed in range(20):
            Fs, gt = synth_fundamentals(10, outlier_count=5, seed=seed)
            prob = autocalib_consensus_problem(Fs, eps=1e-4)
            res = maximize_consensus(prob)
            if res.certified and np.array_equal(res.inlier_mask, gt.inlier_mask):
                hits += 1
        ok = hits >= 19
        report(4, ok, f"certified exact mask on {hits}/20 seeds")


class TestCriterion5:
    def test_autocalib_accuracy(self):
        """From 10 exact synthetic F: recovered K within 1e-3 relative
        focal and principal-point error."""
        worst_df, worst_duv = 0.0, 0.0
        for seed in range(5):
            Fs, gt = synth_fundamentals(10, seed=seed)
            sol = solve_nonminimal(autocalib_problem(Fs))
            rec = recover_K(sol.x)
            errs = calibration_errors(rec.K, gt.K)
            worst_df = max(worst_df, errs["df"])
            worst_duv = max(worst_duv, errs["duv"])
        ok = worst_df <= 1e-3 and worst_duv <= 1e-3
        report(5, ok, f"worst over 5 seeds: df {worst_df:.2e}, duv {worst_duv:.2e}")


class TestCriterion6:
    def test_quartic_hierarchy_behavior(self):
        """On 50 planted quartic systems the order-1 relaxation recovers the
        planted point within 1e-2 on >= 90% of seeds while the minimal-order
        relaxation fails that tolerance on >= 50% (raw relaxation extraction,
        i.e. no local polish or face purification)."""
        hits0, hits1 = 0, 0
        n = 50
        for seed in range(n):
            sys_, gt = synth_quartic_system(3, noise=3e-5, seed=seed)
            r0 = solve_nonminimal(nrsfm_problem(sys_, s=0), polish=False,
                                  purify=False)
            r1 = solve_nonminimal(nrsfm_problem(sys_, s=1), polish=False,
                                  purify=False)
            hits0 += np.linalg.norm(r0.x - gt.k) <= 1e-2
            hits1 += np.linalg.norm(r1.x - gt.k) <= 1e-2
        ok = hits1 >= 0.9 * n and (n - hits0) >= 0.5 * n
        report(6, ok, f"s=1 recovered {hits1}/{n}, s=0 failed {n - hits0}/{n}")


class TestCriterion7:
    def test_solver_unit_suite(self, rng):
        """20 analytic conic instances solved to 1e-6 relative objective
        error with duality gap <= 1e-8 at Optimal."""
        instances = []

        def min_eig(C):
            n = C.shape[0]
            prog = ConicProgram()
            X = prog.add_psd_var(n)
            ids, vals = [], []
            for i in range(n):
                for j in range(i, n):
                    ids.append(X.cell(i, j))
                    vals.append(C[i, j] * (1.0 if i == j else 2.0))
            prog.add_eq([X.cell(i, i) for i in range(n)], np.ones(n), 1.0)
            prog.set_objective(ids, vals)
            return prog, float(np.linalg.eigvalsh(C)[0])

        for _ in range(8):
            C = rng.standard_normal((7, 7))
            instances.append(min_eig((C + C.T) / 2))
        for _ in range(4):  # SOC projection of a point onto itself: 0
            p = rng.uniform(-3, 3, 3)
            prog = ConicProgram()
            t = prog.add_free(1)
            y = prog.add_free(3)
            rows = [(np.array([y[i]]), np.array([1.0]), -float(p[i]))
                    for i in range(3)]
            prog.add_soc_constraint(t, [1.0], 0.0, rows)
            prog.set_objective(t, [1.0])
            instances.append((prog, 0.0))
        for _ in range(4):  # LP corner: min -c'x, 0 <= x <= u
            c = rng.uniform(0.5, 2.0, 3)
            u = rng.uniform(0.5, 2.0, 3)
            prog = ConicProgram()
            xv = prog.add_nonneg(3)
            for i in range(3):
                prog.add_le([xv[i]], [1.0], float(u[i]))
            prog.set_objective(xv, -c)
            instances.append((prog, float(-(c @ u))))
        for _ in range(4):  # Lyapunov-type: min tr X, X >= B'B
            B = rng.standard_normal((4, 4))
            T = B.T @ B
            prog = ConicProgram()
            X = prog.add_psd_var(4)
            entries = [(i, j, X.cell(i, j), 1.0)
                       for i in range(4) for j in range(i, 4)]
            prog.add_lmi(4, entries, const=-T)
            prog.set_objective([X.cell(i, i) for i in range(4)], np.ones(4))
            instances.append((prog, float(np.trace(T))))

        assert len(instances) == 20
        worst_err, worst_gap, solved = 0.0, 0.0, 0
        for prog, target in instances:
            sol = prog.solve()
            if sol.status == Status.OPTIMAL:
                solved += 1
                worst_err = max(worst_err,
                                abs(sol.objective - target) / (1 + abs(target)))
                worst_gap = max(worst_gap, min(sol.gap, sol.relgap))
        ok = solved == 20 and worst_err <= 1e-6 and worst_gap <= 1e-8
        report(7, ok, f"{solved}/20 optimal, worst rel err {worst_err:.2e}, "
                      f"worst gap {worst_gap:.2e}")


class TestCriterion8:
    def test_relaxation_soundness(self, rng):
        """200 random POPs: relaxation bound <= grid minimum + 1e-6, and
        hierarchy monotonicity s=0 -> s=1 in 100% of cases."""
        sound = 0
        monotone = 0
        total = 200
        box_cons = [Polynomial(2, {(0, 0): 9.0, (2, 0): -1.0}),
                    Polynomial(2, {(0, 0): 9.0, (0, 2): -1.0})]
        quad_exps = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        quart_exps = quad_exps + [(3, 0), (2, 1), (1, 2), (0, 3),
                                  (4, 0), (3, 1), (2, 2), (1, 3), (0, 4)]
        def bracket(pop, s):
            # [lower, upper] bracket of the order-s relaxation optimum; an
            # unbounded relaxation has bound -inf (trivially sound; the next
            # hierarchy order restores boundedness)
            try:
                sol = solve_pop(pop, s=s, polish=False, purify=False)
            except RelaxationUnboundedError:
                return -np.inf, -np.inf
            up = sol.objective + 10 * sol.solver_quality * (1 + abs(sol.objective))
            return sol.lower_bound, up

        for trial in range(total):
            exps = quad_exps if trial < 100 else quart_exps
            obj = Polynomial(2, {e: rng.uniform(-1, 1) for e in exps})
            pop = Pop(2, obj, inequalities=box_cons)
            lo0, up0 = bracket(pop, 0)
            lo1, up1 = bracket(pop, 1)
            gmin, _ = grid_min(obj, -3.0, 3.0)
            if lo0 <= gmin + 1e-6 and lo1 <= gmin + 1e-6:
                sound += 1
            # v1* >= v0* certified at solver accuracy: upper(s1) >= lower(s0)
            if up1 >= lo0 - 1e-9 or (np.isinf(lo0) and np.isinf(up1)):
                monotone += 1
        ok = sound == total and monotone == total
        report(8, ok, f"sound {sound}/{total}, monotone {monotone}/{total}")


class TestCriterion9:
    def test_linear_scaling_trend(self):
        """Rigid non-minimal solve time grows sub-quadratically over
        {10, 20, 40, 80, 160} points (log-log slope <= 1.5)."""
        counts = [10, 20, 40, 80, 160]
        estimate_rigid(synth_rigid(10, 0.01, 0.0, 99)[0])  # warm-up
        times = []
        for n in counts:
            corrs, _ = synth_rigid(n, 0.01, 0.0, 5)
            t0 = time.perf_counter()
            estimate_rigid(corrs)
            times.append(time.perf_counter() - t0)
        slope = float(np.polyfit(np.log(counts), np.log(times), 1)[0])
        ok = slope <= 1.5
        report(9, ok, "times " + ", ".join(f"{t * 1e3:.0f}ms" for t in times)
                      + f"; log-log slope {slope:.2f}")


class TestCriterion10:
    def test_determinism(self):
        """Solves, BnB runs, and generators are reproducible bit for bit
        from (inputs, seed, options); wall-clock timing fields excluded."""
        corrs, gt = synth_rigid(8, 0.01, 0.0, 42)
        est1, sol1 = estimate_rigid(corrs)
        est2, sol2 = estimate_rigid(corrs)
        solves_ok = (np.array_equal(sol1.x, sol2.x)
                     and sol1.objective == sol2.objective
                     and np.array_equal(sol1.moments, sol2.moments))

        corrs, gt = synth_rigid(12, 0.01, 0.25, 7)
        eps = 3.0 * np.sqrt(3.0) * gt.noise_sigma_abs
        r1 = maximize_consensus(rigid_consensus_problem(corrs, eps))
        r2 = maximize_consensus(rigid_consensus_problem(corrs, eps))
        j1 = json.dumps({k: v for k, v in r1.to_json().items()},
                        sort_keys=True, default=str)
        j2 = json.dumps({k: v for k, v in r2.to_json().items()},
                        sort_keys=True, default=str)
        from momenta.cli import strip_timing
        bnb_ok = json.dumps(strip_timing(r1.to_json()), sort_keys=True) == \
            json.dumps(strip_timing(r2.to_json()), sort_keys=True)

        gens_ok = True
        a, gta = synth_rigid(15, 0.02, 0.4, 11)
        b, gtb = synth_rigid(15, 0.02, 0.4, 11)
        gens_ok &= all(np.array_equal(x.u, y.u) and np.array_equal(x.v, y.v)
                       for x, y in zip(a, b))
        Fa, _ = synth_fundamentals(5, outlier_count=2, seed=13)
        Fb, _ = synth_fundamentals(5, outlier_count=2, seed=13)
        gens_ok &= all(np.array_equal(x.F, y.F) for x, y in zip(Fa, Fb))
        qa, _ = synth_quartic_system(3, noise=0.001, seed=17)
        qb, _ = synth_quartic_system(3, noise=0.001, seed=17)
        gens_ok &= json.dumps(qa.to_json()) == json.dumps(qb.to_json())

        ok = solves_ok and bnb_ok and gens_ok
        report(10, ok, f"solve {solves_ok}, bnb {bnb_ok}, generators {gens_ok}")
