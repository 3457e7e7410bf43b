import numpy as np
import pytest

from momenta.poly import Polynomial
from momenta.relax import solve_nonminimal
from momenta.vision.nrsfm import (QuarticSystem, nrsfm_problem, nrsfm_solve,
                                  synth_quartic_system)

from test_relax import grid_min


class TestQuarticSystem:
    def test_degree_guard(self):
        with pytest.raises(ValueError):
            QuarticSystem([Polynomial(2, {(5, 0): 1.0})])

    def test_two_variable_guard(self):
        with pytest.raises(ValueError):
            QuarticSystem([Polynomial(3, {(1, 0, 0): 1.0})])

    def test_json_round_trip(self):
        sys_, _ = synth_quartic_system(3, seed=0)
        back = QuarticSystem.from_json(sys_.to_json())
        assert len(back.polys) == 3
        assert back.polys[0].terms == sys_.polys[0].terms


class TestGenerator:
    def test_root_is_zero_of_clean_system(self):
        sys_, gt = synth_quartic_system(4, noise=0.0, seed=1)
        for p in sys_.polys:
            assert abs(p(gt.k)) <= 1e-10

    def test_nonneg_on_working_box(self):
        sys_, gt = synth_quartic_system(3, noise=0.0, seed=2)
        g = np.linspace(-2, 2, 81)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        for p in sys_.polys:
            assert np.min(p.eval_many(X)) >= -1e-9

    def test_indefinite_far_out(self):
        sys_, gt = synth_quartic_system(3, noise=0.0, seed=3)
        g = np.linspace(-8, 8, 161)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        dips = [np.min(p.eval_many(X)) for p in sys_.polys]
        assert min(dips) < -1e-3

    def test_deterministic(self):
        a, gta = synth_quartic_system(3, noise=0.01, seed=4)
        b, gtb = synth_quartic_system(3, noise=0.01, seed=4)
        assert np.array_equal(gta.k, gtb.k)
        assert a.polys[1].terms == b.polys[1].terms


class TestSolve:
    def test_single_flat_quartic_order_one(self):
        # ((k1-a)^2 + (k2-b)^2)^2 has its unique minimizer at (a, b)
        a, b = 0.4, -0.9
        k1 = Polynomial.variable(2, 0)
        k2 = Polynomial.variable(2, 1)
        sigma = (k1 - a) * (k1 - a) + (k2 - b) * (k2 - b)
        sys_ = QuarticSystem([sigma * sigma])
        sol = nrsfm_solve(sys_, s=1)
        assert np.linalg.norm(sol.x - np.array([a, b])) <= 1e-4

    def test_degree_five_rejected(self):
        with pytest.raises(ValueError):
            QuarticSystem([Polynomial(2, {(3, 2): 1.0})])

    def test_solution_matches_grid_oracle(self):
        # value-based oracle: any grid point upper-bounds the true optimum,
        # so the solver's point must come out at least as good (up to slack)
        for seed in range(3):
            sys_, gt = synth_quartic_system(3, noise=1e-4, seed=seed)
            sol = nrsfm_solve(sys_, s=1)
            gval, gx = grid_min(list(sys_.polys), -2.0, 2.0, res=401)
            val = sum(abs(p(sol.x)) for p in sys_.polys)
            # slack covers the least-squares-vs-L1 offset of the local polish
            assert val <= gval + 5e-4
            assert np.linalg.norm(sol.x - gx) <= 0.05

    def test_hierarchy_objective_monotone(self):
        for seed in range(4):
            sys_, _ = synth_quartic_system(3, noise=1e-4, seed=seed)
            r0 = solve_nonminimal(nrsfm_problem(sys_, s=0), polish=False,
                                  purify=False)
            r1 = solve_nonminimal(nrsfm_problem(sys_, s=1), polish=False,
                                  purify=False)
            assert r1.lower_bound >= r0.lower_bound - 1e-6

    def test_order_one_recovers_planted(self):
        hits = 0
        for seed in range(6):
            sys_, gt = synth_quartic_system(3, noise=3e-5, seed=seed)
            sol = nrsfm_solve(sys_, s=1)
            hits += np.linalg.norm(sol.x - gt.k) <= 1e-2
        assert hits >= 5
