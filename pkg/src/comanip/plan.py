"""The planners: arm continuation, platform reconnection, regrasping, and
the global pipeline that strings them together.

Planning runs on the same parameter grid as the feasibility sweep.  Each
robot tracks its grasp with the platform frozen for as long as possible;
when the arm stalls (IK miss, collision margin, joint limit, or
manipulability floor), the platform is repositioned by an optimization
that maximizes how far the replanned arm can continue while overlapping
the already-planned trajectory.  Grasp switches happen at assigned
handover samples with the object frozen and everyone else holding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assign import (
    Assignment,
    AssignmentInfeasibleError,
    AssignmentSearch,
    NoCoverError,
    next_alternative,
)
from .coverage import (
    DEFAULT_RESOLUTION,
    Grasp,
    ObjectTrajectory,
    RobotCoverage,
    ee_target,
    ik_check,
    sample_grid,
)
from .geom import Pose, compose, inverse, pose_distance
from .model import (
    Config,
    IkOptions,
    arm_base,
    fk,
    ik_arm,
    ik_arm_multiseed,
    manipulability,
    platform_candidates,
    reach_prefilter,
)
from .scene import Scene, in_cfree

TRACK = "track"
PLATFORM_TRANSIT = "platform_transit"
REGRASP_FREE = "regrasp_free"
HOLD = "hold"

RETRACT_DISTANCE = 0.10
RETRACT_KNOTS = 5


class PlanningError(Exception):
    pass


class SegmentPlanningError(PlanningError):
    def __init__(self, robot: int, grasp_id: str, reached: float, reason: str):
        self.robot = robot
        self.grasp_id = grasp_id
        self.reached = reached
        self.reason = reason
        super().__init__(
            f"robot {robot} stalled on grasp {grasp_id} at t={reached:.4f}: {reason}"
        )


class ConnectPlanError(PlanningError):
    pass


class RegraspPlanError(PlanningError):
    def __init__(self, robot: int, t: float, reason: str):
        self.robot = robot
        self.t = t
        self.reason = reason
        super().__init__(f"robot {robot} regrasp at t={t:.4f} failed: {reason}")


class PlanningFailedError(PlanningError):
    """Every attempted assignment failed; carries the per-attempt loci."""

    def __init__(self, attempts: list[dict]):
        self.attempts = attempts
        lines = "; ".join(
            f"rank {a['rank']}: {a['failure']}" for a in attempts
        )
        super().__init__(f"all assignments failed ({lines})")


@dataclass(frozen=True)
class PlanOptions:
    resolution: int = DEFAULT_RESOLUTION
    seed: int = 0
    xi: float = 0.05
    margin: float | None = None
    max_alternatives: int = 20
    manip_floor: float = 1e-3
    seeds: int = 8
    lookahead: int = 5
    max_transits: int = 8
    # compact carry shape (joints 2..6) used while driving between grasps
    tuck_arm: tuple[float, ...] = (0.35, 1.9, 0.0, 0.8, 0.0)
    arm_step_bound: float = 0.6
    platform_step_bound: float = 0.5
    theta_step_bound: float = 0.8
    track_pos_tol: float = 1e-4
    track_rot_tol: float = 1e-4
    ik: IkOptions = field(default_factory=IkOptions)

    def __post_init__(self):
        if self.xi <= 0.0:
            raise ValueError("overlap parameter xi must be positive")

    @property
    def xi_steps(self) -> int:
        return max(1, round(self.xi * (self.resolution - 1)))


@dataclass(frozen=True)
class Knot:
    t: float
    config: Config
    grasp_id: str | None
    event: str


@dataclass(frozen=True)
class RobotTrajectory:
    robot_index: int
    knots: tuple[Knot, ...]
    xi: float


@dataclass(frozen=True)
class RegraspBlock:
    robot: int
    grid_index: int
    start_step: int
    end_step: int
    from_grasp: str
    to_grasp: str


@dataclass(frozen=True)
class MultiRobotPlan:
    trajectories: tuple[RobotTrajectory, ...]
    t: tuple[float, ...]
    blocks: tuple[RegraspBlock, ...]
    assignment: Assignment
    resolution: int
    seed: int
    xi: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.t)

    @property
    def n_robots(self) -> int:
        return len(self.trajectories)

    @property
    def total_regrasps(self) -> int:
        return len(self.blocks)


# -- manipulator-only continuation ---------------------------------------------

def _track_step(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                grasp: Grasp, t: float, q_p: np.ndarray, seed_arm: np.ndarray,
                opts: PlanOptions) -> tuple[np.ndarray | None, str]:
    """One continuation step at fixed platform; returns (arm, fail_reason)."""
    robot = scene.robots[robot_index]
    target = ee_target(traj, grasp, t)
    base = arm_base(robot.model, q_p)
    q_m = ik_arm(robot.model.arm, compose(inverse(base), target), seed_arm, opts.ik)
    if q_m is None:
        return None, "ik"
    if np.abs(q_m - seed_arm).max() > opts.arm_step_bound:
        return None, "discontinuity"
    if manipulability(robot.model.arm, q_m) < opts.manip_floor:
        return None, "manipulability"
    if not in_cfree(scene, robot_index, Config(q_p, q_m), traj.pose_at(t), (),
                    exempt_anchors=(target,), margin=opts.margin):
        return None, "collision"
    return q_m, ""


def plan_track(scene: Scene, robot_index: int, traj: ObjectTrajectory,
               grasp: Grasp, indices, seed_config: Config, grid: np.ndarray,
               opts: PlanOptions) -> tuple[list[tuple[int, Config]], str]:
    """Continuation over the given grid indices with the platform frozen.

    Emits (index, Config) pairs until the first failure; the seed knot
    itself is not re-emitted.  Returns the knots plus the failure reason
    ('' when every index succeeded).
    """
    q_p = seed_config.platform
    arm = seed_config.arm
    out: list[tuple[int, Config]] = []
    for idx in indices:
        q_m, why = _track_step(scene, robot_index, traj, grasp, float(grid[idx]),
                               q_p, arm, opts)
        if q_m is None:
            return out, why
        out.append((idx, Config(q_p, q_m)))
        arm = q_m
    return out, ""


def plan_manipulator(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                     grasp: Grasp, start: tuple[float, Config],
                     direction: int = 1, end_t: float | None = None,
                     opts: PlanOptions = PlanOptions()) -> tuple[list[Knot], float]:
    """Arm-only continuation from (t0, config) until failure or the segment end.

    Returns the planned knots (the start knot included when it is itself
    valid) and the last feasible parameter beta; an immediate failure gives
    an empty list with beta = t0.
    """
    grid = sample_grid(opts.resolution)
    t0, config = start
    k0 = _t_index(t0, grid)
    if end_t is None:
        end_t = 1.0 if direction > 0 else 0.0
    k_end = _t_index(end_t, grid)
    arm0, why = _track_step(scene, robot_index, traj, grasp, float(grid[k0]),
                            config.platform, config.arm, opts)
    if arm0 is None:
        return [], t0
    knots = [Knot(float(grid[k0]), Config(config.platform, arm0), grasp.id, TRACK)]
    step = 1 if direction > 0 else -1
    indices = range(k0 + step, k_end + step, step)
    more, _ = plan_track(scene, robot_index, traj, grasp, indices,
                         knots[0].config, grid, opts)
    knots.extend(Knot(float(grid[i]), c, grasp.id, TRACK) for i, c in more)
    return knots, knots[-1].t


def _t_index(t: float, grid: np.ndarray) -> int:
    k = int(round(t * (len(grid) - 1)))
    if not (0 <= k < len(grid)) or abs(grid[k] - t) > 1e-9:
        raise ValueError(f"parameter {t} is not on the planning grid")
    return k


# -- platform reconnection (the connect optimization) ---------------------------

@dataclass(frozen=True)
class _Candidate:
    q_p: np.ndarray
    arm_at_stall: np.ndarray
    reach_index: int  # furthest replanned index (beta2')
    envelope_ok: bool  # old arm inside the replanned per-joint envelope


def connect_plan(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                 grasp: Grasp, knots: list[tuple[int, Config]], stall_index: int,
                 end_index: int, grid: np.ndarray, opts: PlanOptions,
                 rng: np.random.Generator) -> tuple[int, list[tuple[int, Config]], Config]:
    """Reposition the platform after a stall at ``stall_index``.

    Scores each platform candidate by how far the arm could continue from
    the stall with that base (subject to overlapping the planned window by
    xi and the old arm config lying inside the replanned joint envelope),
    then replans the overlap window with the base moving linearly and the
    arm still tracking.  Returns (window_start_index, transit_knots,
    config_at_stall).
    """
    robot = scene.robots[robot_index]
    by_index = {idx: cfg for idx, cfg in knots}
    if stall_index not in by_index:
        raise ConnectPlanError("no planned knot at the stall index")
    old_cfg = by_index[stall_index]
    first_idx = knots[0][0]
    w = min(opts.xi_steps, stall_index - first_idx)
    if w < 1:
        raise ConnectPlanError("stall at the segment start leaves no overlap window")

    t_stall = float(grid[stall_index])
    target_stall = ee_target(traj, grasp, t_stall)
    mid_idx = (stall_index + end_index) // 2
    anchors = [target_stall,
               ee_target(traj, grasp, float(grid[mid_idx])),
               ee_target(traj, grasp, float(grid[end_index]))]
    candidates: list[np.ndarray] = []
    seen = set()
    for anchor in anchors:
        for q_p in platform_candidates(robot.model, anchor):
            key = (round(q_p[0], 6), round(q_p[1], 6), round(q_p[2], 6))
            if key not in seen:
                seen.add(key)
                candidates.append(q_p)

    scored: list[_Candidate] = []
    for q_p in candidates:
        if np.allclose(q_p, old_cfg.platform, atol=1e-9):
            continue
        if not reach_prefilter(robot.model, q_p, target_stall):
            continue
        base = arm_base(robot.model, q_p)
        object_pose = traj.pose_at(t_stall)

        def accept(q_m, q_p=q_p, object_pose=object_pose, target=target_stall):
            return in_cfree(scene, robot_index, Config(q_p, q_m), object_pose, (),
                            exempt_anchors=(target,), margin=opts.margin)

        arm_stall = ik_arm_multiseed(
            robot.model.arm, compose(inverse(base), target_stall),
            old_cfg.arm, rng, seeds=opts.seeds, opts=opts.ik, accept=accept,
        )
        if arm_stall is None:
            continue
        seed_cfg = Config(q_p, arm_stall)
        # overlap constraint: the new base must track back across the window
        back, why = plan_track(scene, robot_index, traj, grasp,
                               range(stall_index - 1, stall_index - w - 1, -1),
                               seed_cfg, grid, opts)
        if why:
            continue
        fwd, _ = plan_track(scene, robot_index, traj, grasp,
                            range(stall_index + 1, end_index + 1),
                            seed_cfg, grid, opts)
        reach_index = stall_index + len(fwd)
        if reach_index <= stall_index:
            continue
        window_arms = [c.arm for _, c in back] + [arm_stall] + [c.arm for _, c in fwd]
        envelope = np.stack(window_arms)
        lo = envelope.min(axis=0) - 1e-9
        hi = envelope.max(axis=0) + 1e-9
        env_ok = bool(np.all(old_cfg.arm >= lo) and np.all(old_cfg.arm <= hi))
        scored.append(_Candidate(q_p, arm_stall, reach_index, env_ok))

    if not scored:
        raise ConnectPlanError("no platform candidate improves the stall")
    # the envelope condition is enforced when satisfiable; the transit replan
    # below is what actually guarantees a continuous blend either way
    if any(c.envelope_ok for c in scored):
        scored = [c for c in scored if c.envelope_ok]
    scored.sort(key=lambda c: (-c.reach_index, c.q_p[0], c.q_p[1], c.q_p[2]))

    for cand in scored:
        window = w
        for _ in range(3):
            transit = _plan_transit(scene, robot_index, traj, grasp, by_index,
                                    stall_index, window, cand.q_p, grid, opts)
            if transit is not None:
                return stall_index - window, transit, transit[-1][1]
            window = max(1, window // 2)
            if window == w:
                break
    raise ConnectPlanError("transit window replan failed for every candidate")


def _plan_transit(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                  grasp: Grasp, by_index: dict[int, Config], stall_index: int,
                  w: int, q_p_new: np.ndarray, grid: np.ndarray,
                  opts: PlanOptions) -> list[tuple[int, Config]] | None:
    """Linear platform motion over [stall-w, stall] with the arm tracking."""
    robot = scene.robots[robot_index]
    start_idx = stall_index - w
    if start_idx not in by_index:
        return None
    q_p_old = by_index[start_idx].platform
    arm = by_index[start_idx].arm
    out: list[tuple[int, Config]] = []
    for j in range(w + 1):
        idx = start_idx + j
        frac = j / w
        q_p = (1.0 - frac) * q_p_old + frac * q_p_new
        t = float(grid[idx])
        target = ee_target(traj, grasp, t)
        base = arm_base(robot.model, q_p)
        q_m = ik_arm(robot.model.arm, compose(inverse(base), target), arm, opts.ik)
        if q_m is None or np.abs(q_m - arm).max() > opts.arm_step_bound:
            return None
        if not in_cfree(scene, robot_index, Config(q_p, q_m), traj.pose_at(t), (),
                        exempt_anchors=(target,), margin=opts.margin):
            return None
        out.append((idx, Config(q_p, q_m)))
        arm = q_m
    return out


# -- one segment under one grasp -------------------------------------------------

def coordinated_platform_plan(scene: Scene, robot_index: int,
                              traj: ObjectTrajectory, grasp: Grasp,
                              start_index: int, end_index: int,
                              start_config: Config, grid: np.ndarray,
                              opts: PlanOptions, rng: np.random.Generator,
                              emit_start: bool = True) -> list[tuple[int, Config, str]]:
    """Track one grasp over [start_index, end_index] with platform transits.

    The start config must already realize the grasp at the start sample.
    Raises SegmentPlanningError with the reached parameter on failure.
    """
    knots: list[tuple[int, Config]] = []
    events: dict[int, str] = {}
    if emit_start:
        arm0, why = _track_step(scene, robot_index, traj, grasp,
                                float(grid[start_index]), start_config.platform,
                                start_config.arm, opts)
        if arm0 is None:
            raise SegmentPlanningError(robot_index, grasp.id,
                                       float(grid[start_index]),
                                       f"start config invalid ({why})")
        knots.append((start_index, Config(start_config.platform, arm0)))
        cursor = knots[0][1]
        pos = start_index
    else:
        cursor = start_config
        pos = start_index - 1

    transits = 0
    while pos < end_index:
        more, why = plan_track(scene, robot_index, traj, grasp,
                               range(pos + 1, end_index + 1), cursor, grid, opts)
        knots.extend(more)
        if more:
            pos = more[-1][0]
            cursor = more[-1][1]
        if pos >= end_index:
            break
        if not knots:
            raise SegmentPlanningError(robot_index, grasp.id, float(grid[start_index]),
                                       f"immediate stall ({why})")
        if transits >= opts.max_transits:
            raise SegmentPlanningError(robot_index, grasp.id, float(grid[pos]),
                                       "platform transit budget exhausted")
        try:
            win_start, transit, new_cfg = connect_plan(
                scene, robot_index, traj, grasp, knots, pos, end_index, grid,
                opts, rng,
            )
        except ConnectPlanError as err:
            raise SegmentPlanningError(robot_index, grasp.id, float(grid[pos]),
                                       f"connect failed: {err}") from None
        knots = [k for k in knots if k[0] < win_start] + transit
        for idx, _ in transit:
            if idx > win_start:
                events[idx] = PLATFORM_TRANSIT
        cursor = new_cfg
        transits += 1

    return [(idx, cfg, events.get(idx, TRACK)) for idx, cfg in knots]


# -- regrasping -------------------------------------------------------------------

def _ik_candidates(scene: Scene, robot_index: int, target: Pose,
                   object_pose: Pose, others, warm: Config,
                   opts: PlanOptions, rng: np.random.Generator) -> list[Config]:
    """All collision-free IK solutions over the platform candidate grid."""
    robot = scene.robots[robot_index]
    out: list[Config] = []
    for q_p in platform_candidates(robot.model, target, extra=[warm.platform]):
        if not reach_prefilter(robot.model, q_p, target):
            continue
        base = arm_base(robot.model, q_p)
        local = compose(inverse(base), target)
        seeds = [warm.arm] + [robot.model.arm.random_config(rng)
                              for _ in range(opts.seeds - 1)]
        for seed in seeds:
            q_m = ik_arm(robot.model.arm, local, seed, opts.ik)
            if q_m is None:
                continue
            cfg = Config(q_p, q_m)
            if in_cfree(scene, robot_index, cfg, object_pose, others,
                        exempt_anchors=(target,), margin=opts.margin):
                out.append(cfg)
    return out


def best_grasping_config(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                         t: float, grasp: Grasp, others, warm: Config,
                         opts: PlanOptions, rng: np.random.Generator) -> Config:
    """Argmax-manipulability configuration realizing the grasp at t.

    Used both when establishing the very first grasp and when a regrasp
    re-establishes a new closed chain.
    """
    target = ee_target(traj, grasp, t)
    object_pose = traj.pose_at(t)
    candidates = _ik_candidates(scene, robot_index, target, object_pose, others,
                                warm, opts, rng)
    if not candidates:
        raise RegraspPlanError(robot_index, t, f"no IK solution for grasp {grasp.id}")
    robot = scene.robots[robot_index]
    best = candidates[0]
    best_w = manipulability(robot.model.arm, best.arm)
    for cfg in candidates[1:]:
        w = manipulability(robot.model.arm, cfg.arm)
        if w > best_w:
            best, best_w = cfg, w
    return best


def _cartesian_leg(scene: Scene, robot_index: int, start_pose: Pose,
                   offsets: np.ndarray, q_p: np.ndarray, seed_arm: np.ndarray,
                   object_pose: Pose, others, anchors, opts: PlanOptions
                   ) -> list[Config] | None:
    """IK continuation along EE poses start_pose * Tz(offset)."""
    robot = scene.robots[robot_index]
    base = arm_base(robot.model, q_p)
    arm = seed_arm
    out = []
    for d in offsets:
        target = compose(start_pose, Pose(np.eye(3), np.array([0.0, 0.0, d])))
        q_m = ik_arm(robot.model.arm, compose(inverse(base), target), arm, opts.ik)
        if q_m is None:
            return None
        cfg = Config(q_p, q_m)
        if not in_cfree(scene, robot_index, cfg, object_pose, others,
                        exempt_anchors=anchors, margin=opts.margin):
            return None
        out.append(cfg)
        arm = q_m
    return out


def _joint_leg(scene: Scene, robot_index: int, start: Config, goal: Config,
               object_pose: Pose, others, anchors, opts: PlanOptions
               ) -> list[Config] | None:
    """Straight joint-space interpolation, densified to the step bounds."""
    d_arm = float(np.abs(goal.arm - start.arm).max())
    d_xy = float(np.linalg.norm(goal.platform[:2] - start.platform[:2]))
    d_th = abs(goal.platform[2] - start.platform[2])
    steps = max(
        2,
        math.ceil(d_arm / (0.5 * opts.arm_step_bound)),
        math.ceil(d_xy / (0.5 * opts.platform_step_bound)),
        math.ceil(d_th / (0.5 * opts.theta_step_bound)),
    )
    steps = min(steps, 200)
    out = []
    for j in range(1, steps + 1):
        frac = j / steps
        cfg = Config((1 - frac) * start.platform + frac * goal.platform,
                     (1 - frac) * start.arm + frac * goal.arm)
        if not in_cfree(scene, robot_index, cfg, object_pose, others,
                        exempt_anchors=anchors, margin=opts.margin):
            return None
        out.append(cfg)
    return out


def _drive_leg(scene: Scene, robot_index: int, a: Config, b: Config,
               object_pose: Pose, others, anchors, opts: PlanOptions
               ) -> list[Config] | None:
    """Platform move in the carry shape: direct, else detour around the object."""
    direct = _joint_leg(scene, robot_index, a, b, object_pose, others, anchors,
                        opts)
    if direct is not None:
        return direct
    delta = b.platform[:2] - a.platform[:2]
    norm = float(np.linalg.norm(delta))
    if norm < 1e-9:
        return None
    perp = np.array([-delta[1], delta[0]]) / norm
    mid_xy = 0.5 * (a.platform[:2] + b.platform[:2])
    obj_xy = object_pose.translation[:2]
    mid_arm = 0.5 * (a.arm + b.arm)
    mid_theta = 0.5 * (a.platform[2] + b.platform[2])
    for center in (obj_xy, mid_xy):
        for dist in (0.8, 1.2, 1.6):
            for sign in (1.0, -1.0):
                xy = center + sign * dist * perp
                wp = Config(np.array([xy[0], xy[1], mid_theta]), mid_arm)
                leg1 = _joint_leg(scene, robot_index, a, wp, object_pose, others,
                                  anchors, opts)
                if leg1 is None:
                    continue
                leg2 = _joint_leg(scene, robot_index, wp, b, object_pose, others,
                                  anchors, opts)
                if leg2 is None:
                    continue
                return leg1 + leg2
    return None


def _transit_legs(scene: Scene, robot_index: int, start: Config, goal: Config,
                  object_pose: Pose, others, anchors, opts: PlanOptions
                  ) -> list[Config] | None:
    """Free-space transit: fold to the carry shape, drive, extend.

    Falls back to a direct joint interpolation when the folded route is
    blocked (e.g. the carry shape itself collides in a cramped scene).
    """
    tucked_start = Config(start.platform,
                          np.array([start.arm[0], *opts.tuck_arm]))
    tucked_goal = Config(goal.platform, np.array([goal.arm[0], *opts.tuck_arm]))
    fold = _joint_leg(scene, robot_index, start, tucked_start, object_pose,
                      others, anchors, opts)
    drive = None
    extend = None
    if fold is not None:
        drive = _drive_leg(scene, robot_index, tucked_start, tucked_goal,
                           object_pose, others, anchors, opts)
    if drive is not None:
        extend = _joint_leg(scene, robot_index, tucked_goal, goal, object_pose,
                            others, anchors, opts)
    if fold is not None and drive is not None and extend is not None:
        return fold + drive + extend
    return _joint_leg(scene, robot_index, start, goal, object_pose, others,
                      anchors, opts)


def plan_regrasp(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                 t: float, from_grasp: Grasp, to_grasp: Grasp,
                 others: list[tuple[int, Config]], current: Config,
                 opts: PlanOptions, rng: np.random.Generator
                 ) -> tuple[list[tuple[Config, str]], Config]:
    """Free-space switch from one grasp to another with the world frozen.

    Returns ((config, event) knots, final config); the final knot holds the
    new grasp.  Path: release, retract along the gripper axis, joint-space
    transit to the pre-grasp, approach, attach.
    """
    if from_grasp.id == to_grasp.id:
        return [], current

    object_pose = traj.pose_at(t)
    from_ee = ee_target(traj, from_grasp, t)
    to_ee = ee_target(traj, to_grasp, t)
    goal = best_grasping_config(scene, robot_index, traj, t, to_grasp, others,
                                current, opts, rng)
    anchors = (from_ee, to_ee)
    robot = scene.robots[robot_index]

    last_reason = "path blocked"
    for attempt in range(3):
        # a perturbed retract direction can free a blocked first leg
        jitter = attempt * 0.15
        retract = np.linspace(0.0, -RETRACT_DISTANCE, RETRACT_KNOTS + 1)[1:]
        if jitter:
            retract = retract * (1.0 + jitter)
        out_legs: list[Config] = []

        leg = _cartesian_leg(scene, robot_index, from_ee, retract,
                             current.platform, current.arm, object_pose, others,
                             anchors, opts)
        if leg is None:
            last_reason = "retract blocked"
            continue
        out_legs.extend(leg)
        retract_end = leg[-1]

        pre_offset = Pose(np.eye(3), np.array([0.0, 0.0, -RETRACT_DISTANCE]))
        pre_target = compose(to_ee, pre_offset)
        base = arm_base(robot.model, goal.platform)
        pre_arm = ik_arm(robot.model.arm, compose(inverse(base), pre_target),
                         goal.arm, opts.ik)
        if pre_arm is None:
            last_reason = "pre-grasp unreachable"
            continue
        pre_cfg = Config(goal.platform, pre_arm)

        leg = _transit_legs(scene, robot_index, retract_end, pre_cfg,
                            object_pose, others, anchors, opts)
        if leg is None:
            last_reason = "transit blocked"
            continue
        out_legs.extend(leg)

        approach = np.linspace(-RETRACT_DISTANCE, 0.0, RETRACT_KNOTS + 1)[1:]
        leg = _cartesian_leg(scene, robot_index, to_ee, approach, goal.platform,
                             pre_arm, object_pose, others, anchors, opts)
        if leg is None:
            last_reason = "approach blocked"
            continue
        out_legs.extend(leg[:-1])

        knots = [(cfg, REGRASP_FREE) for cfg in out_legs]
        knots.append((goal, TRACK))
        return knots, goal

    raise RegraspPlanError(robot_index, t, last_reason)


# -- trajectory check --------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    passed: bool
    violations: tuple[dict, ...]

    def by_kind(self, kind: str) -> list[dict]:
        return [v for v in self.violations if v["kind"] == kind]


def trajectory_check(scene: Scene, traj: ObjectTrajectory, plan: MultiRobotPlan,
                     grasps: list[Grasp], opts: PlanOptions = PlanOptions()
                     ) -> CheckReport:
    """Full-plan verification: tracking, closed chain, C_free, continuity."""
    grasp_by_id = {g.id: g for g in grasps}
    violations: list[dict] = []
    n = plan.n_robots
    steps = plan.n_steps
    block_anchor: dict[tuple[int, int], tuple[Pose, Pose]] = {}
    for blk in plan.blocks:
        pose_from = ee_target(traj, grasp_by_id[blk.from_grasp], plan.t[blk.start_step])
        pose_to = ee_target(traj, grasp_by_id[blk.to_grasp], plan.t[blk.start_step])
        for s in range(blk.start_step, blk.end_step + 1):
            block_anchor[(blk.robot, s)] = (pose_from, pose_to)

    ee_poses = np.empty((n, steps), dtype=object)
    for r, rt in enumerate(plan.trajectories):
        for s, knot in enumerate(rt.knots):
            ee_poses[r, s] = fk(scene.robots[r].model, knot.config)

    for s in range(steps):
        t = plan.t[s]
        object_pose = traj.pose_at(t)
        for r, rt in enumerate(plan.trajectories):
            knot = rt.knots[s]
            prev = rt.knots[s - 1] if s > 0 else None
            if knot.event in (TRACK, PLATFORM_TRANSIT, HOLD) and knot.grasp_id:
                target = ee_target(traj, grasp_by_id[knot.grasp_id], t)
                dt_err, dr_err = pose_distance(ee_poses[r, s], target)
                if dt_err > opts.track_pos_tol or dr_err > opts.track_rot_tol:
                    violations.append({"kind": "tracking", "step": s, "robot": r,
                                       "pos": dt_err, "rot": dr_err})
                anchors: tuple[Pose, ...] = (target,)
            else:
                anchors = block_anchor.get((r, s), ())
            if knot.event == HOLD and prev is not None:
                if (np.abs(knot.config.platform - prev.config.platform).max() > 1e-12
                        or np.abs(knot.config.arm - prev.config.arm).max() > 1e-12):
                    violations.append({"kind": "hold_motion", "step": s, "robot": r})
            if prev is not None:
                if np.abs(knot.config.arm - prev.config.arm).max() > opts.arm_step_bound:
                    violations.append({"kind": "arm_step", "step": s, "robot": r})
                if (np.linalg.norm(knot.config.platform[:2] - prev.config.platform[:2])
                        > opts.platform_step_bound
                        or abs(knot.config.platform[2] - prev.config.platform[2])
                        > opts.theta_step_bound):
                    violations.append({"kind": "platform_step", "step": s, "robot": r})
                if knot.event == TRACK and prev.event == TRACK:
                    if np.abs(knot.config.platform - prev.config.platform).max() > 1e-12:
                        violations.append({"kind": "platform_parsimony", "step": s,
                                           "robot": r})
            others = [(i, plan.trajectories[i].knots[s].config)
                      for i in range(n) if i != r]
            if not in_cfree(scene, r, knot.config, object_pose, others,
                            exempt_anchors=anchors, margin=opts.margin):
                violations.append({"kind": "collision", "step": s, "robot": r})

    # closed-chain drift per robot pair between regrasp events
    for i in range(n):
        for j in range(i + 1, n):
            ref = None
            for s in range(steps):
                ki = plan.trajectories[i].knots[s]
                kj = plan.trajectories[j].knots[s]
                if ki.grasp_id is None or kj.grasp_id is None:
                    ref = None
                    continue
                rel = compose(inverse(ee_poses[i, s]), ee_poses[j, s])
                if ref is None or (s > 0 and (
                        plan.trajectories[i].knots[s - 1].grasp_id != ki.grasp_id
                        or plan.trajectories[j].knots[s - 1].grasp_id != kj.grasp_id)):
                    ref = rel
                    continue
                dt_err, dr_err = pose_distance(rel, ref)
                if dt_err > opts.track_pos_tol or dr_err > opts.track_rot_tol:
                    violations.append({"kind": "closed_chain", "step": s,
                                       "pair": (i, j), "pos": dt_err, "rot": dr_err})

    return CheckReport(passed=not violations, violations=tuple(violations))


# -- global pipeline ----------------------------------------------------------------

def acquire_start_config(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                         grasp: Grasp, end_index: int, grid: np.ndarray,
                         opts: PlanOptions, rng: np.random.Generator) -> Config:
    """Starting configuration realizing the first grasp at t=0.

    Candidates (seeded by the scene's initial config) are ranked by
    manipulability; among the best few, prefer one whose arm-only
    continuation already survives the whole first segment, falling back to
    the furthest-reaching (platform transits cover the rest).
    """
    robot = scene.robots[robot_index]
    target = ee_target(traj, grasp, 0.0)
    candidates = _ik_candidates(scene, robot_index, target, traj.pose_at(0.0),
                                (), robot.initial, opts, rng)
    if not candidates:
        raise SegmentPlanningError(robot_index, grasp.id, 0.0,
                                   "no feasible start configuration")
    candidates.sort(key=lambda c: -manipulability(robot.model.arm, c.arm))
    best_cfg = None
    best_reach = -1
    for cfg in candidates[:12]:
        more, why = plan_track(scene, robot_index, traj, grasp,
                               range(1, end_index + 1), cfg, grid, opts)
        reach = more[-1][0] if more else 0
        if not why or reach >= end_index:
            return cfg
        if reach > best_reach:
            best_cfg, best_reach = cfg, reach
    return best_cfg if best_cfg is not None else candidates[0]


def _plan_assignment(scene: Scene, traj: ObjectTrajectory, grasps: list[Grasp],
                     assignment: Assignment, opts: PlanOptions) -> MultiRobotPlan:
    """Plan every robot along an assignment into one aligned timeline."""
    grasp_by_id = {g.id: g for g in grasps}
    n = scene.n_robots
    grid = sample_grid(opts.resolution)
    rngs = [np.random.default_rng([opts.seed, 1000 + r]) for r in range(n)]

    events = sorted(assignment.regrasp_events, key=lambda e: (e.grid_index, e.robot))
    boundaries = sorted({0, len(grid) - 1, *(e.grid_index for e in events)})
    events_at = {}
    for ev in events:
        events_at.setdefault(ev.grid_index, []).append(ev)

    active: list[str] = [s.segments[0].grasp_id for s in assignment.schemes]
    streams: list[list[Knot]] = [[] for _ in range(n)]
    t_steps: list[float] = []
    blocks: list[RegraspBlock] = []

    cursors: list[Config] = []
    for r in range(n):
        first_end = assignment.schemes[r].segments[0].end_index
        cfg = acquire_start_config(scene, r, traj, grasp_by_id[active[r]],
                                   first_end, grid, opts, rngs[r])
        cursors.append(cfg)

    prev_boundary: int | None = None
    for bi, boundary in enumerate(boundaries):
        lo = 0 if prev_boundary is None else prev_boundary + 1
        hi = boundary
        if hi >= lo:
            span_knots: list[list[tuple[int, Config, str]]] = []
            for r in range(n):
                grasp = grasp_by_id[active[r]]
                span = coordinated_platform_plan(
                    scene, r, traj, grasp, lo, hi, cursors[r], grid, opts,
                    rngs[r], emit_start=(prev_boundary is None),
                )
                span_knots.append(span)
                cursors[r] = span[-1][1]
            for k in range(hi - lo + 1):
                t_steps.append(float(grid[lo + k]))
                for r in range(n):
                    idx, cfg, event = span_knots[r][k]
                    streams[r].append(Knot(float(grid[idx]), cfg, active[r], event))
        for ev in events_at.get(boundary, []):
            r = ev.robot
            others = [(i, cursors[i]) for i in range(n) if i != r]
            knots, goal = plan_regrasp(
                scene, r, traj, float(grid[boundary]),
                grasp_by_id[ev.from_grasp], grasp_by_id[ev.to_grasp],
                others, cursors[r], opts, rngs[r],
            )
            if knots:
                start_step = len(t_steps)
                for cfg, event in knots:
                    t_steps.append(float(grid[boundary]))
                    gid = ev.to_grasp if event == TRACK else None
                    streams[r].append(Knot(float(grid[boundary]), cfg, gid, event))
                    for i in range(n):
                        if i != r:
                            streams[i].append(Knot(float(grid[boundary]), cursors[i],
                                                   active[i], HOLD))
                blocks.append(RegraspBlock(r, boundary, start_step,
                                           len(t_steps) - 1, ev.from_grasp,
                                           ev.to_grasp))
            cursors[r] = goal
            active[r] = ev.to_grasp
        prev_boundary = boundary

    trajectories = tuple(
        RobotTrajectory(r, tuple(streams[r]), opts.xi) for r in range(n)
    )
    return MultiRobotPlan(
        trajectories=trajectories,
        t=tuple(t_steps),
        blocks=tuple(blocks),
        assignment=assignment,
        resolution=opts.resolution,
        seed=opts.seed,
        xi=opts.xi,
    )


def global_plan(scene: Scene, traj: ObjectTrajectory, grasps: list[Grasp],
                opts: PlanOptions = PlanOptions(),
                coverages: list[RobotCoverage] | None = None) -> MultiRobotPlan:
    """The full pipeline: feasibility sweep, allocation, planning, checking.

    Raises NoCoverError before any planning when some trajectory sample is
    infeasible under every grasp, and PlanningFailedError when every
    attempted assignment fails planning or the final check.
    """
    if not grasps:
        raise ValueError("grasp set is empty")
    if len(grasps) < scene.n_robots:
        raise ValueError(
            f"need at least as many grasps ({len(grasps)}) as robots ({scene.n_robots})"
        )
    if len({g.id for g in grasps}) != len(grasps):
        raise ValueError("grasp ids must be unique")

    if coverages is None:
        coverages = [
            ik_check(scene, r, traj, grasps, opts.resolution, opts.seed)
            for r in range(scene.n_robots)
        ]
    for cov in coverages:
        if not cov.covers_whole():
            raise NoCoverError(cov.union.complement(), robot_index=cov.robot_index)

    search = AssignmentSearch(coverages, scene.leader, opts.resolution)
    attempts: list[dict] = []
    assignment = search.next_assignment()
    if assignment is None:
        raise AssignmentInfeasibleError(
            "no assignment satisfies the distinct-grasp constraint"
        )
    while assignment is not None and len(attempts) < opts.max_alternatives:
        summary = [s.grasp_ids() for s in assignment.schemes]
        try:
            plan = _plan_assignment(scene, traj, grasps, assignment, opts)
        except PlanningError as err:
            attempts.append({"rank": assignment.rank, "schemes": summary,
                             "failure": str(err)})
            assignment = next_alternative(search)
            continue
        report = trajectory_check(scene, traj, plan, grasps, opts)
        if report.passed:
            diagnostics = {
                "attempts": attempts,
                "assignment_rank": assignment.rank,
                "optimal_assignment": assignment.optimal,
                "search_exact": search.exact,
            }
            return replace(plan, diagnostics=diagnostics)
        attempts.append({
            "rank": assignment.rank,
            "schemes": summary,
            "failure": f"trajectory check: {len(report.violations)} violations "
                       f"(first: {report.violations[0]})",
        })
        assignment = next_alternative(search)

    raise PlanningFailedError(attempts)
