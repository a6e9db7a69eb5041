import numpy as np
import pytest

from comanip.assign import AssignmentInfeasibleError, NoCoverError
from comanip.coverage import (
    Grasp,
    ObjectTrajectory,
    ee_target,
    feasible_config,
    sample_grid,
)
from comanip.geom import Pose, compose, inverse, pose_distance, pose_from_xyz_rpy
from comanip.model import (
    Config,
    arm_base,
    fk,
    ik_arm,
    manipulability,
    platform_candidates,
)
from comanip.plan import (
    PLATFORM_TRANSIT,
    REGRASP_FREE,
    TRACK,
    PlanOptions,
    PlanningFailedError,
    best_grasping_config,
    connect_plan,
    coordinated_platform_plan,
    global_plan,
    plan_manipulator,
    plan_regrasp,
    plan_track,
    trajectory_check,
)
from conftest import make_test_robot
from test_scene import simple_scene


OPTS = PlanOptions(resolution=41, seed=0)
SIDE_GRASP = Grasp("side", pose_from_xyz_rpy([-0.32, 0, 0], [0, 90, 0]))
SIDE_GRASP_XP = Grasp("side_xp", pose_from_xyz_rpy([0.32, 0, 0], [0, -90, 0]))


def gentle_traj(dx=0.15, yaw=20.0, z=0.8):
    a = pose_from_xyz_rpy([0.0, 0.0, z], [0, 0, 0])
    b = pose_from_xyz_rpy([dx, 0.0, z], [0, 0, yaw])
    return ObjectTrajectory(((0.0, a), (1.0, b)))


def receding_traj(x0=0.45, x1=4.0, z=0.8):
    a = pose_from_xyz_rpy([x0, 0.0, z], [0, 0, 0])
    b = pose_from_xyz_rpy([x1, 0.0, z], [0, 0, 0])
    return ObjectTrajectory(((0.0, a), (1.0, b)))


def start_config(scene, robot_index, traj, grasp, seed=0):
    from comanip.coverage import sample_grid as _sg
    from comanip.plan import acquire_start_config

    rng = np.random.default_rng(seed)
    return acquire_start_config(scene, robot_index, traj, grasp,
                                OPTS.resolution - 1, _sg(OPTS.resolution),
                                OPTS, rng)


class TestPlanManipulator:
    def test_easy_segment_reaches_end(self):
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        knots, beta = plan_manipulator(scene, 0, traj, SIDE_GRASP, (0.0, cfg),
                                       opts=OPTS)
        assert beta == 1.0
        assert len(knots) == OPTS.resolution
        assert all(k.event == TRACK for k in knots)
        # platform frozen throughout
        for k in knots:
            assert np.array_equal(k.config.platform, cfg.platform)

    def test_receding_object_stalls_near_reach_boundary(self):
        scene = simple_scene(1)
        traj = receding_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        knots, beta = plan_manipulator(scene, 0, traj, SIDE_GRASP, (0.0, cfg),
                                       opts=OPTS)
        assert beta < 1.0
        # per-sample oracle with the platform frozen at the same pose; same
        # stall conditions as the planner (IK, manip floor, collision)
        from comanip.scene import in_cfree

        grid = sample_grid(OPTS.resolution)
        robot = scene.robots[0].model
        base = arm_base(robot, cfg.platform)
        rng = np.random.default_rng(1)
        oracle_last = 0
        for k, t in enumerate(grid):
            target = ee_target(traj, SIDE_GRASP, float(t))
            local = compose(inverse(base), target)
            found = None
            for s in range(40):
                seed = cfg.arm if s == 0 else robot.arm.random_config(rng)
                q = ik_arm(robot.arm, local, seed)
                if q is None:
                    continue
                if manipulability(robot.arm, q) < OPTS.manip_floor:
                    continue
                if not in_cfree(scene, 0, Config(cfg.platform, q), traj.pose_at(float(t)),
                                exempt_anchors=(target,)):
                    continue
                found = q
                break
            if found is None:
                break
            oracle_last = k
        beta_idx = int(round(beta * (OPTS.resolution - 1)))
        assert abs(beta_idx - oracle_last) <= 1

    def test_immediate_failure_empty(self):
        scene = simple_scene(1)
        traj = receding_traj(x0=5.0, x1=6.0)
        cfg = Config(np.array([0.0, 0.0, 0.0]), np.full(6, 0.5))
        knots, beta = plan_manipulator(scene, 0, traj, SIDE_GRASP, (0.0, cfg),
                                       opts=OPTS)
        assert knots == [] and beta == 0.0


class TestConnectPlan:
    def test_platform_standoff_restored(self):
        # object recedes: arm alone stalls, a platform move restores full reach
        scene = simple_scene(1)
        traj = receding_traj(x0=0.45, x1=1.6)
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        grid = sample_grid(OPTS.resolution)
        knots, why = plan_track(scene, 0, traj, SIDE_GRASP,
                                range(1, OPTS.resolution), cfg, grid, OPTS)
        knots = [(0, cfg)] + knots
        stall = knots[-1][0]
        assert stall < OPTS.resolution - 1
        rng = np.random.default_rng(0)
        win_start, transit, new_cfg = connect_plan(
            scene, 0, traj, SIDE_GRASP, knots, stall, OPTS.resolution - 1,
            grid, OPTS, rng,
        )
        assert transit[0][0] == win_start
        assert transit[-1][0] == stall
        # the new base must track strictly beyond the stall (beta2' > beta1)
        more, _ = plan_track(scene, 0, traj, SIDE_GRASP,
                             range(stall + 1, OPTS.resolution), new_cfg,
                             grid, OPTS)
        assert more and more[-1][0] > stall

    def test_no_improvement_fails(self):
        # everything already reachable: no candidate strictly improves
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        grid = sample_grid(OPTS.resolution)
        knots, _ = plan_track(scene, 0, traj, SIDE_GRASP,
                              range(1, OPTS.resolution), cfg, grid, OPTS)
        knots = [(0, cfg)] + knots
        from comanip.plan import ConnectPlanError

        with pytest.raises(ConnectPlanError):
            connect_plan(scene, 0, traj, SIDE_GRASP, knots,
                         OPTS.resolution - 1, OPTS.resolution - 1, grid, OPTS,
                         np.random.default_rng(0))

    def test_zero_xi_rejected(self):
        with pytest.raises(ValueError):
            PlanOptions(xi=0.0)


class TestCoordinatedPlatformPlan:
    def test_easy_segment_single_pass(self):
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        grid = sample_grid(OPTS.resolution)
        span = coordinated_platform_plan(scene, 0, traj, SIDE_GRASP, 0,
                                         OPTS.resolution - 1, cfg, grid, OPTS,
                                         np.random.default_rng(0))
        assert len(span) == OPTS.resolution
        assert all(event == TRACK for _, _, event in span)

    def test_transit_inserted_when_object_recedes(self):
        scene = simple_scene(1)
        traj = receding_traj(x0=0.45, x1=1.6)
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        grid = sample_grid(OPTS.resolution)
        span = coordinated_platform_plan(scene, 0, traj, SIDE_GRASP, 0,
                                         OPTS.resolution - 1, cfg, grid, OPTS,
                                         np.random.default_rng(0))
        assert len(span) == OPTS.resolution
        events = {event for _, _, event in span}
        assert PLATFORM_TRANSIT in events
        # grasp tracked at every knot (Eq. 5 pointwise)
        robot = scene.robots[0].model
        for idx, cfg_k, _ in span:
            dt, dr = pose_distance(fk(robot, cfg_k),
                                   ee_target(traj, SIDE_GRASP, float(grid[idx])))
            assert dt <= 1e-4 and dr <= 1e-4

    def test_clamped_platform_reduces_to_plan_manipulator(self):
        scene = simple_scene(1)
        traj = receding_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        robot = scene.robots[0]
        clamped_model = type(robot.model)(
            robot.model.name, robot.model.platform.clamped(cfg.platform),
            robot.model.arm,
        )
        clamped_robot = type(robot)(clamped_model, robot.initial, robot.geometry)
        clamped_scene = type(scene)(
            (clamped_robot,), scene.obj, scene.obstacles, scene.floor_z,
            scene.leader, scene.margin, scene.approach_radius,
        )
        _, beta = plan_manipulator(clamped_scene, 0, traj, SIDE_GRASP, (0.0, cfg),
                                   opts=OPTS)
        grid = sample_grid(OPTS.resolution)
        from comanip.plan import SegmentPlanningError

        with pytest.raises(SegmentPlanningError) as err:
            coordinated_platform_plan(clamped_scene, 0, traj, SIDE_GRASP, 0,
                                      OPTS.resolution - 1, cfg, grid, OPTS,
                                      np.random.default_rng(0))
        assert err.value.reached == pytest.approx(beta, abs=1e-12)


class TestPlanRegrasp:
    def test_identity_regrasp_zero_length(self):
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        knots, goal = plan_regrasp(scene, 0, traj, 0.0, SIDE_GRASP, SIDE_GRASP,
                                   [], cfg, OPTS, np.random.default_rng(0))
        assert knots == [] and goal is cfg

    def test_switch_sides_and_argmax(self):
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        rng = np.random.default_rng(3)
        knots, goal = plan_regrasp(scene, 0, traj, 0.0, SIDE_GRASP, SIDE_GRASP_XP,
                                   [], cfg, OPTS, rng)
        assert knots, "expected a nonempty free-space path"
        assert knots[-1][1] == TRACK
        assert all(event == REGRASP_FREE for _, event in knots[:-1])
        # final knot realizes the new grasp
        robot = scene.robots[0].model
        dt, dr = pose_distance(fk(robot, goal), ee_target(traj, SIDE_GRASP_XP, 0.0))
        assert dt <= 1e-6 and dr <= 1e-6

    def test_target_manipulability_beats_grid_oracle(self):
        scene = simple_scene(1)
        traj = gentle_traj()
        cfg = start_config(scene, 0, traj, SIDE_GRASP)
        rng = np.random.default_rng(11)
        goal = best_grasping_config(scene, 0, traj, 0.0, SIDE_GRASP_XP, [], cfg,
                                    OPTS, rng)
        robot = scene.robots[0].model
        got_w = manipulability(robot.arm, goal.arm)
        # oracle: re-enumerate the documented candidate grid independently
        target = ee_target(traj, SIDE_GRASP_XP, 0.0)
        oracle_rng = np.random.default_rng(11)
        best = 0.0
        from comanip.scene import in_cfree

        for q_p in platform_candidates(robot, target, extra=[cfg.platform]):
            base = arm_base(robot, q_p)
            local = compose(inverse(base), target)
            seeds = [cfg.arm] + [robot.arm.random_config(oracle_rng)
                                 for _ in range(OPTS.seeds - 1)]
            for seed in seeds:
                q_m = ik_arm(robot.arm, local, seed)
                if q_m is None:
                    continue
                if not in_cfree(scene, 0, Config(q_p, q_m), traj.pose_at(0.0),
                                exempt_anchors=(target,)):
                    continue
                best = max(best, manipulability(robot.arm, q_m))
        assert got_w >= best - 1e-9


def mini_two_robot_scene():
    scene = simple_scene(2)
    return scene


class TestGlobalPlan:
    def test_two_robots_zero_regrasps(self):
        scene = mini_two_robot_scene()
        traj = gentle_traj()
        grasps = [SIDE_GRASP, SIDE_GRASP_XP]
        plan = global_plan(scene, traj, grasps, OPTS)
        assert plan.total_regrasps == 0
        assert plan.n_steps == OPTS.resolution
        report = trajectory_check(scene, traj, plan, grasps, OPTS)
        assert report.passed, report.violations[:3]

    def test_empty_grasp_set_rejected(self):
        scene = mini_two_robot_scene()
        with pytest.raises(ValueError):
            global_plan(scene, gentle_traj(), [], OPTS)

    def test_fewer_grasps_than_robots_rejected(self):
        scene = mini_two_robot_scene()
        with pytest.raises(ValueError):
            global_plan(scene, gentle_traj(), [SIDE_GRASP], OPTS)

    def test_unreachable_trajectory_fails_early(self):
        scene = mini_two_robot_scene()
        high = pose_from_xyz_rpy([0, 0, 4.0], [0, 0, 0])
        traj = ObjectTrajectory(((0.0, gentle_traj().pose_at(0.0)), (0.5, high),
                                 (1.0, gentle_traj().pose_at(1.0))))
        with pytest.raises(NoCoverError) as err:
            global_plan(scene, traj, [SIDE_GRASP, SIDE_GRASP_XP],
                        PlanOptions(resolution=21, seed=0))
        assert not err.value.gaps.is_empty()


@pytest.fixture(scope="module")
def checked_plan():
    scene = mini_two_robot_scene()
    traj = gentle_traj()
    grasps = [SIDE_GRASP, SIDE_GRASP_XP]
    plan = global_plan(scene, traj, grasps, OPTS)
    return scene, traj, grasps, plan


class TestTrajectoryCheck:

    def test_emitted_plan_passes(self, checked_plan):
        scene, traj, grasps, plan = checked_plan
        assert trajectory_check(scene, traj, plan, grasps, OPTS).passed

    def test_perturbed_knot_flagged(self, checked_plan):
        scene, traj, grasps, plan = checked_plan
        from dataclasses import replace

        rt = plan.trajectories[0]
        step = plan.n_steps // 2
        bad_knot = rt.knots[step]
        bad_arm = bad_knot.config.arm.copy()
        bad_arm[2] += 0.1
        bad_knots = list(rt.knots)
        bad_knots[step] = replace(bad_knot, config=Config(bad_knot.config.platform,
                                                          bad_arm))
        bad_plan = replace(plan, trajectories=(
            replace(rt, knots=tuple(bad_knots)),
        ) + plan.trajectories[1:])
        report = trajectory_check(scene, traj, bad_plan, grasps, OPTS)
        assert not report.passed
        tracked = report.by_kind("tracking")
        assert any(v["step"] == step and v["robot"] == 0 for v in tracked)

    def test_colliding_platforms_flagged(self, checked_plan):
        scene, traj, grasps, plan = checked_plan
        from dataclasses import replace

        # route robot 0's platform onto robot 1's cell at one step
        rt0, rt1 = plan.trajectories
        step = plan.n_steps // 2
        knots = list(rt0.knots)
        stolen = rt1.knots[step].config.platform
        knots[step] = replace(knots[step],
                              config=Config(stolen, knots[step].config.arm))
        bad_plan = replace(plan, trajectories=(replace(rt0, knots=tuple(knots)), rt1))
        report = trajectory_check(scene, traj, bad_plan, grasps, OPTS)
        collisions = report.by_kind("collision")
        assert any(v["step"] == step for v in collisions)
