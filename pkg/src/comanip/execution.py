"""Deterministic kinematic execution with leader disturbances.

The leader replays its planned knots plus injected noise; every follower
is corrected online so the actual relative EE pose matches the planned
one (the closed chain).  Correction is arm-first, with a planar platform
fallback when the arm alone cannot absorb the deviation.  The whole run
is reproducible from the disturbance seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coverage import Grasp, ObjectTrajectory
from .geom import Pose, compose, inverse, pose_distance
from .model import Config, IkOptions, arm_base, fk, ik_arm
from .plan import MultiRobotPlan
from .scene import Scene

CORRECTION_IK = IkOptions(pos_tol=1e-6, rot_tol=1e-6)


@dataclass(frozen=True)
class Disturbance:
    platform: float = 0.0  # uniform bound on leader platform x/y, meters
    arm: float = 0.0  # uniform bound on leader arm joints and theta, radians
    seed: int = 0

    @property
    def active(self) -> bool:
        return self.platform > 0.0 or self.arm > 0.0


@dataclass(frozen=True)
class Fault:
    step: int
    robot: int
    reason: str


@dataclass(frozen=True)
class ExecutionTrace:
    t: tuple[float, ...]
    actual: tuple[tuple[Config, ...], ...]  # [robot][step]
    object_poses: tuple[Pose, ...]
    residual_pos: np.ndarray  # (n_robots, steps), nan where inactive
    residual_rot: np.ndarray
    faults: tuple[Fault, ...]
    disturbance: Disturbance
    leader: int

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def summary(self) -> dict:
        active = ~np.isnan(self.residual_pos)
        pos = self.residual_pos[active]
        rot = self.residual_rot[active]
        return {
            "steps": self.n_steps,
            "robots": len(self.actual),
            "leader": self.leader,
            "fault_count": len(self.faults),
            "active_pair_samples": int(active.sum()),
            "max_residual_pos": float(pos.max()) if pos.size else 0.0,
            "max_residual_rot": float(rot.max()) if rot.size else 0.0,
            "mean_residual_pos": float(pos.mean()) if pos.size else 0.0,
            "mean_residual_rot": float(rot.mean()) if rot.size else 0.0,
        }


def follower_correction(scene: Scene, follower_index: int,
                        planned_relative: Pose, leader_actual_ee: Pose,
                        follower_planned: Config,
                        ik_opts: IkOptions = CORRECTION_IK) -> Config | None:
    """Modify the follower config so its EE hits leader_ee * planned_relative.

    Arm-only correction seeded at the planned arm; the platform moves only
    when the arm alone cannot reach (planar shift by the target's planar
    displacement).  Returns None when both stages fail.
    """
    robot = scene.robots[follower_index].model
    target = compose(leader_actual_ee, planned_relative)

    base = arm_base(robot, follower_planned.platform)
    q_m = ik_arm(robot.arm, compose(inverse(base), target),
                 follower_planned.arm, ik_opts)
    if q_m is not None:
        return Config(follower_planned.platform, q_m)

    planned_ee = fk(robot, follower_planned)
    delta_xy = target.translation[:2] - planned_ee.translation[:2]
    yaw = lambda rot: float(np.arctan2(rot[1, 0], rot[0, 0]))
    delta_theta = yaw(target.rotation) - yaw(planned_ee.rotation)
    q_p = follower_planned.platform + np.array(
        [delta_xy[0], delta_xy[1], delta_theta]
    )
    if not robot.platform.within_bounds(q_p):
        return None
    base = arm_base(robot, q_p)
    q_m = ik_arm(robot.arm, compose(inverse(base), target),
                 follower_planned.arm, ik_opts)
    if q_m is None:
        return None
    return Config(q_p, q_m)


def _noisy_leader(config: Config, robot, dist: Disturbance,
                  rng: np.random.Generator) -> Config:
    q_p = config.platform.copy()
    q_p[0] += rng.uniform(-dist.platform, dist.platform)
    q_p[1] += rng.uniform(-dist.platform, dist.platform)
    q_p[2] += rng.uniform(-dist.arm, dist.arm)
    q_m = config.arm + rng.uniform(-dist.arm, dist.arm, 6)
    q_p[0] = np.clip(q_p[0], *robot.platform.bounds_x)
    q_p[1] = np.clip(q_p[1], *robot.platform.bounds_y)
    q_p[2] = np.clip(q_p[2], *robot.platform.bounds_theta)
    q_m = np.clip(q_m, robot.arm.limits[:, 0], robot.arm.limits[:, 1])
    return Config(q_p, q_m)


def simulate(scene: Scene, traj: ObjectTrajectory, plan: MultiRobotPlan,
             grasps: list[Grasp], disturbance: Disturbance = Disturbance()
             ) -> ExecutionTrace:
    """Step the plan with leader noise and follower closed-chain correction."""
    grasp_by_id = {g.id: g for g in grasps}
    n = plan.n_robots
    steps = plan.n_steps
    leader = scene.leader
    rng = np.random.default_rng(disturbance.seed)

    actual: list[list[Config]] = [[] for _ in range(n)]
    object_poses: list[Pose] = []
    residual_pos = np.full((n, steps), np.nan)
    residual_rot = np.full((n, steps), np.nan)
    faults: list[Fault] = []
    last_object = traj.pose_at(plan.t[0])

    for s in range(steps):
        leader_knot = plan.trajectories[leader].knots[s]
        leader_holding = leader_knot.grasp_id is not None
        if disturbance.active and leader_holding:
            leader_actual = _noisy_leader(leader_knot.config,
                                          scene.robots[leader].model,
                                          disturbance, rng)
        else:
            leader_actual = leader_knot.config
        actual[leader].append(leader_actual)
        leader_actual_ee = fk(scene.robots[leader].model, leader_actual)
        leader_planned_ee = fk(scene.robots[leader].model, leader_knot.config)

        if leader_holding:
            grasp = grasp_by_id[leader_knot.grasp_id]
            last_object = compose(leader_actual_ee, inverse(grasp.relative))
        object_poses.append(last_object)

        for r in range(n):
            if r == leader:
                continue
            knot = plan.trajectories[r].knots[s]
            if knot.grasp_id is None or not leader_holding:
                # correction suspended for a regrasping robot and while the
                # leader itself is off the chain
                actual[r].append(knot.config)
                continue
            planned_rel = compose(
                inverse(leader_planned_ee), fk(scene.robots[r].model, knot.config)
            )
            corrected = follower_correction(scene, r, planned_rel,
                                            leader_actual_ee, knot.config)
            if corrected is None:
                faults.append(Fault(s, r, "correction infeasible"))
                fallback = actual[r][-1] if actual[r] else knot.config
                actual[r].append(fallback)
            else:
                actual[r].append(corrected)
            actual_rel = compose(
                inverse(leader_actual_ee),
                fk(scene.robots[r].model, actual[r][-1]),
            )
            dp, dr = pose_distance(actual_rel, planned_rel)
            residual_pos[r, s] = dp
            residual_rot[r, s] = dr

    return ExecutionTrace(
        t=tuple(plan.t),
        actual=tuple(tuple(a) for a in actual),
        object_poses=tuple(object_poses),
        residual_pos=residual_pos,
        residual_rot=residual_rot,
        faults=tuple(faults),
        disturbance=disturbance,
        leader=leader,
    )
