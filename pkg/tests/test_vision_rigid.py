import numpy as np
import pytest
from hypothesis import given, strategies as st

from momenta.consensus import maximize_consensus
from momenta.relax import solve_nonminimal
from momenta.vision.rigid import (Correspondence3D, RigidEstimate, data_t_box,
                                  estimate_rigid, fit_rigid_svd, quat_to_rot,
                                  residual_group, rigid_consensus_problem,
                                  rigid_residuals, rot_to_quat,
                                  rotation_angle_deg, synth_rigid,
                                  unit_quaternion_constraint)

unit_quat = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4,
                     max_size=4).filter(
    lambda q: np.linalg.norm(q) > 1e-3).map(
    lambda q: np.array(q) / np.linalg.norm(q))


class TestQuaternion:
    @given(unit_quat)
    def test_rotation_orthonormal_det_one(self, q):
        R = quat_to_rot(q)
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-7)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)

    @given(unit_quat)
    def test_round_trip_rot_quat(self, q):
        R = quat_to_rot(q)
        q2 = rot_to_quat(R)
        assert np.allclose(quat_to_rot(q2), R, atol=1e-8)

    def test_estimate_validates_norm(self):
        with pytest.raises(ValueError):
            RigidEstimate(np.array([1.0, 1.0, 0.0, 0.0]), np.zeros(3))


class TestResiduals:
    def test_vanish_at_truth(self, rng):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        t = rng.uniform(-1, 1, 3)
        R = quat_to_rot(q)
        u = rng.uniform(-1, 1, 3)
        c = Correspondence3D(u, R @ u + t)
        x = np.concatenate([q, t])
        for p in residual_group(c):
            assert p(x) == pytest.approx(0.0, abs=1e-12)

    def test_unit_constraint(self):
        p = unit_quaternion_constraint()
        x = np.array([0.5, 0.5, 0.5, 0.5, 9.0, 9.0, 9.0])
        assert p(x) == pytest.approx(0.0)

    def test_needs_three_points(self):
        corrs, _ = synth_rigid(3, 0.0, 0.0, 0)
        with pytest.raises(ValueError):
            rigid_residuals(corrs[:2])


class TestSynth:
    def test_noiseless_consistency(self):
        corrs, gt = synth_rigid(8, 0.0, 0.0, 3)
        x = np.concatenate([gt.q, gt.t])
        for c in corrs:
            for p in residual_group(c):
                assert p(x) == pytest.approx(0.0, abs=1e-10)

    def test_deterministic(self):
        a, gta = synth_rigid(12, 0.02, 0.25, 7)
        b, gtb = synth_rigid(12, 0.02, 0.25, 7)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.u, cb.u)
            assert np.array_equal(ca.v, cb.v)
        assert np.array_equal(gta.q, gtb.q)
        assert np.array_equal(gta.inlier_mask, gtb.inlier_mask)

    def test_outlier_count_ceiling(self):
        corrs, gt = synth_rigid(100, 0.0, 0.9, 0)
        assert int((~gt.inlier_mask).sum()) == 90
        corrs, gt = synth_rigid(7, 0.0, 0.5, 0)
        assert int((~gt.inlier_mask).sum()) == int(np.ceil(0.5 * 7))

    def test_validation(self):
        with pytest.raises(ValueError):
            synth_rigid(2, 0.0, 0.0, 0)
        with pytest.raises(ValueError):
            synth_rigid(5, 0.0, 1.0, 0)


class TestEstimate:
    def test_identity_transform(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, (6, 3))
        corrs = [Correspondence3D(p, p) for p in pts]
        est, sol = estimate_rigid(corrs)
        assert rotation_angle_deg(est.R, np.eye(3)) <= 1e-5
        assert np.linalg.norm(est.t) <= 1e-6

    def test_planted_exact_points(self):
        corrs, gt = synth_rigid(10, 0.0, 0.0, 11)
        est, sol = estimate_rigid(corrs)
        assert rotation_angle_deg(est.R, gt.R) <= 1e-4
        assert np.linalg.norm(est.t - gt.t) <= 1e-5
        assert sol.rank_gap <= 1e-6

    def test_agrees_with_svd_fit_noiseless(self):
        corrs, gt = synth_rigid(6, 0.0, 0.0, 21)
        est, _ = estimate_rigid(corrs)
        ref = fit_rigid_svd(corrs)
        assert rotation_angle_deg(est.R, ref.R) <= 1e-4
        assert np.linalg.norm(est.t - ref.t) <= 1e-5

    def test_equivariance_under_prerotation(self):
        # rotating both clouds by R0 conjugates the estimate, same objective
        corrs, gt = synth_rigid(8, 0.01, 0.0, 5)
        q0 = np.array([0.5, -0.5, 0.5, 0.5])
        R0 = quat_to_rot(q0 / np.linalg.norm(q0))
        rotated = [Correspondence3D(R0 @ c.u, R0 @ c.v) for c in corrs]
        sol_a = solve_nonminimal(rigid_residuals(corrs))
        sol_b = solve_nonminimal(rigid_residuals(rotated))
        assert sol_a.objective == pytest.approx(sol_b.objective,
                                                rel=1e-5, abs=1e-6)
        Ra = RigidEstimate.from_point(sol_a.x).R
        Rb = RigidEstimate.from_point(sol_b.x).R
        assert rotation_angle_deg(Rb, R0 @ Ra @ R0.T) <= 1e-3


class TestConsensusRigid:
    def test_small_planted_instance(self):
        corrs, gt = synth_rigid(12, 0.01, 0.25, 2)
        eps = 3 * np.sqrt(3) * gt.noise_sigma_abs
        prob = rigid_consensus_problem(corrs, eps)
        res = maximize_consensus(prob)
        assert res.status == "certified"
        assert np.array_equal(res.inlier_mask, gt.inlier_mask)

    def test_t_box_contains_truth(self):
        corrs, gt = synth_rigid(10, 0.02, 0.3, 4)
        lo, hi = data_t_box(corrs)
        assert np.all(gt.t >= lo) and np.all(gt.t <= hi)
