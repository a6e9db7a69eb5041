import numpy as np
import pytest

from comanip.execution import (
    CORRECTION_IK,
    Disturbance,
    follower_correction,
    simulate,
)
from comanip.geom import Pose, compose, inverse, pose_distance
from comanip.model import Config, fk
from test_plan import OPTS, SIDE_GRASP, SIDE_GRASP_XP, gentle_traj
from test_scene import simple_scene


@pytest.fixture(scope="module")
def executed(checked_plan):
    return checked_plan


# reuse the planned two-robot scenario from the plan tests
from test_plan import checked_plan  # noqa: E402,F401


class TestSimulate:
    def test_zero_noise_residuals_tiny(self, executed):
        scene, traj, grasps, plan = executed
        trace = simulate(scene, traj, plan, grasps)
        assert trace.summary()["max_residual_pos"] <= 1e-9
        assert trace.summary()["max_residual_rot"] <= 1e-9
        assert trace.summary()["fault_count"] == 0
        # actual equals planned exactly at zero noise
        for r in range(plan.n_robots):
            for s in range(plan.n_steps):
                planned = plan.trajectories[r].knots[s].config
                got = trace.actual[r][s]
                assert np.array_equal(got.platform, planned.platform)
                assert np.array_equal(got.arm, planned.arm)

    def test_zero_noise_residuals_do_not_grow(self, executed):
        scene, traj, grasps, plan = executed
        trace = simulate(scene, traj, plan, grasps)
        active = ~np.isnan(trace.residual_pos)
        vals = trace.residual_pos[active]
        assert np.all(np.diff(vals) <= 1e-12) or np.all(vals <= 1e-9)

    def test_disturbance_corrected_below_millimeter(self, executed):
        scene, traj, grasps, plan = executed
        worst_pos, worst_rot = 0.0, 0.0
        for seed in range(5):
            trace = simulate(scene, traj, plan, grasps,
                             Disturbance(platform=0.005, arm=0.01, seed=seed))
            s = trace.summary()
            assert s["fault_count"] == 0
            worst_pos = max(worst_pos, s["max_residual_pos"])
            worst_rot = max(worst_rot, s["max_residual_rot"])
        assert worst_pos <= 1e-3
        assert worst_rot <= 2e-3

    def test_determinism(self, executed):
        scene, traj, grasps, plan = executed
        d = Disturbance(platform=0.005, arm=0.01, seed=3)
        a = simulate(scene, traj, plan, grasps, d)
        b = simulate(scene, traj, plan, grasps, d)
        assert a.summary() == b.summary()
        for r in range(plan.n_robots):
            for s in range(plan.n_steps):
                assert np.array_equal(a.actual[r][s].arm, b.actual[r][s].arm)

    def test_huge_disturbance_faults_without_crash(self, executed):
        scene, traj, grasps, plan = executed
        trace = simulate(scene, traj, plan, grasps,
                         Disturbance(platform=2.0, arm=1.5, seed=0))
        # the run completes; faults may or may not occur but nothing raises
        assert trace.n_steps == plan.n_steps

    def test_object_follows_leader(self, executed):
        scene, traj, grasps, plan = executed
        trace = simulate(scene, traj, plan, grasps)
        grasp_by_id = {g.id: g for g in grasps}
        leader = scene.leader
        for s in (0, plan.n_steps // 2, plan.n_steps - 1):
            knot = plan.trajectories[leader].knots[s]
            if knot.grasp_id is None:
                continue
            expected = compose(
                fk(scene.robots[leader].model, trace.actual[leader][s]),
                inverse(grasp_by_id[knot.grasp_id].relative),
            )
            dp, dr = pose_distance(trace.object_poses[s], expected)
            assert dp <= 1e-12 and dr <= 1e-9


class TestFollowerCorrection:
    def test_on_plan_returns_planned_exactly(self, executed):
        scene, traj, grasps, plan = executed
        leader = scene.leader
        follower = 1 - leader
        s = plan.n_steps // 2
        lk = plan.trajectories[leader].knots[s]
        fkn = plan.trajectories[follower].knots[s]
        leader_ee = fk(scene.robots[leader].model, lk.config)
        rel = compose(inverse(leader_ee), fk(scene.robots[follower].model, fkn.config))
        got = follower_correction(scene, follower, rel, leader_ee, fkn.config)
        assert got is not None
        assert np.array_equal(got.platform, fkn.config.platform)
        assert np.array_equal(got.arm, fkn.config.arm)

    def test_leader_shift_propagates_rigidly(self, executed):
        scene, traj, grasps, plan = executed
        leader = scene.leader
        follower = 1 - leader
        s = plan.n_steps // 2
        lk = plan.trajectories[leader].knots[s]
        fkn = plan.trajectories[follower].knots[s]
        leader_ee = fk(scene.robots[leader].model, lk.config)
        rel = compose(inverse(leader_ee), fk(scene.robots[follower].model, fkn.config))
        shift = Pose(np.eye(3), np.array([0.01, 0.0, 0.0]))
        shifted_ee = compose(shift, leader_ee)
        got = follower_correction(scene, follower, rel, shifted_ee, fkn.config)
        assert got is not None
        target = compose(shifted_ee, rel)
        dp, dr = pose_distance(fk(scene.robots[follower].model, got), target)
        assert dp <= 1e-6 and dr <= 1e-6
        # the follower EE moved by the same world displacement
        moved = fk(scene.robots[follower].model, got).translation \
            - fk(scene.robots[follower].model, fkn.config).translation
        assert np.allclose(moved, [0.01, 0.0, 0.0], atol=1e-5)

    def test_far_leader_engages_platform_or_fails(self, executed):
        scene, traj, grasps, plan = executed
        leader = scene.leader
        follower = 1 - leader
        s = plan.n_steps // 2
        lk = plan.trajectories[leader].knots[s]
        fkn = plan.trajectories[follower].knots[s]
        leader_ee = fk(scene.robots[leader].model, lk.config)
        rel = compose(inverse(leader_ee), fk(scene.robots[follower].model, fkn.config))
        shift = Pose(np.eye(3), np.array([1.5, 0.0, 0.0]))
        got = follower_correction(scene, follower, rel, compose(shift, leader_ee),
                                  fkn.config)
        if got is not None:
            # arm alone cannot absorb 1.5 m: the platform must have moved
            assert not np.allclose(got.platform, fkn.config.platform, atol=1e-6)
