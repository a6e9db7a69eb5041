"""Object trajectory, grasp set, and the per-grasp feasibility sweep.

The sweep samples the trajectory parameter on a uniform grid and asks, for
every (grasp, sample), whether some whole-robot configuration realizes the
grasp: a platform pose from the polar candidate grid admitting an arm IK
solution that is collision-free (other robots ignored at this stage; the
trajectory check enforces them later).  Runs of feasible samples merge
into closed parameter intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Pose, compose, interpolate, inverse
from .model import (
    Config,
    IkOptions,
    arm_base,
    fk,
    ik_arm_multiseed,
    platform_candidates,
    reach_prefilter,
)
from .scene import Scene, in_cfree

DEFAULT_RESOLUTION = 201
# cheaper iteration budget for existence sweeps; fine IK uses IkOptions defaults
SWEEP_IK = IkOptions(max_iters=60)


@dataclass(frozen=True)
class Grasp:
    """Candidate grasp: fixed transform from object frame to EE frame."""

    id: str
    relative: Pose


@dataclass(frozen=True)
class ObjectTrajectory:
    """Waypoint poses over t in [0, 1], geodesic between waypoints."""

    waypoints: tuple[tuple[float, Pose], ...]

    def __post_init__(self):
        ts = [t for t, _ in self.waypoints]
        if len(ts) < 2:
            raise ValueError("trajectory needs at least two waypoints")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoint parameters must be strictly increasing")
        if abs(ts[0]) > 1e-12 or abs(ts[-1] - 1.0) > 1e-12:
            raise ValueError("trajectory must start at t=0 and end at t=1")

    def pose_at(self, t: float) -> Pose:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"trajectory parameter {t} outside [0, 1]")
        ts = [w[0] for w in self.waypoints]
        hi = int(np.searchsorted(ts, t))
        if hi < len(ts) and ts[hi] == t:
            return self.waypoints[hi][1]
        lo = hi - 1
        t0, p0 = self.waypoints[lo]
        t1, p1 = self.waypoints[hi]
        return interpolate(p0, p1, (t - t0) / (t1 - t0))


def object_pose_at(traj: ObjectTrajectory, t: float) -> Pose:
    return traj.pose_at(t)


def ee_target(traj: ObjectTrajectory, grasp: Grasp, t: float) -> Pose:
    """World EE pose that realizes the grasp at parameter t."""
    return compose(traj.pose_at(t), grasp.relative)


# -- interval sets -------------------------------------------------------------

@dataclass(frozen=True)
class ParamIntervalSet:
    """Sorted disjoint closed subintervals of [0, 1]."""

    intervals: tuple[tuple[float, float], ...] = ()
    merge_eps: float = 1e-9

    @staticmethod
    def empty() -> "ParamIntervalSet":
        return ParamIntervalSet(())

    @staticmethod
    def full() -> "ParamIntervalSet":
        return ParamIntervalSet(((0.0, 1.0),))

    @staticmethod
    def from_intervals(raw, merge_eps: float = 1e-9) -> "ParamIntervalSet":
        items = sorted((float(a), float(b)) for a, b in raw)
        for a, b in items:
            if b < a:
                raise ValueError(f"interval [{a}, {b}] reversed")
        merged: list[list[float]] = []
        for a, b in items:
            if merged and a <= merged[-1][1] + merge_eps:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return ParamIntervalSet(tuple((a, b) for a, b in merged), merge_eps)

    def is_empty(self) -> bool:
        return not self.intervals

    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, t: float, tol: float = 0.0) -> bool:
        return any(a - tol <= t <= b + tol for a, b in self.intervals)

    def union(self, other: "ParamIntervalSet") -> "ParamIntervalSet":
        eps = min(self.merge_eps, other.merge_eps)
        return ParamIntervalSet.from_intervals(
            list(self.intervals) + list(other.intervals), eps
        )

    def intersection(self, other: "ParamIntervalSet") -> "ParamIntervalSet":
        out = []
        for a1, b1 in self.intervals:
            for a2, b2 in other.intervals:
                lo, hi = max(a1, a2), min(b1, b2)
                if lo <= hi:
                    out.append((lo, hi))
        eps = min(self.merge_eps, other.merge_eps)
        return ParamIntervalSet.from_intervals(out, eps)

    def complement(self) -> "ParamIntervalSet":
        """Closure of [0,1] minus this set."""
        out = []
        cursor = 0.0
        for a, b in self.intervals:
            if a > cursor:
                out.append((cursor, a))
            cursor = max(cursor, b)
        if cursor < 1.0:
            out.append((cursor, 1.0))
        return ParamIntervalSet.from_intervals(out, self.merge_eps)

    def covers_unit(self, tol: float = 1e-12) -> bool:
        """Does the set cover all of [0, 1]?"""
        return (
            len(self.intervals) == 1
            and self.intervals[0][0] <= tol
            and self.intervals[0][1] >= 1.0 - tol
        )


def intervals_from_mask(mask: np.ndarray, grid: np.ndarray,
                        merge_eps: float) -> ParamIntervalSet:
    """Closed intervals spanned by runs of feasible grid samples."""
    out = []
    start = None
    for k, ok in enumerate(mask):
        if ok and start is None:
            start = k
        elif not ok and start is not None:
            out.append((float(grid[start]), float(grid[k - 1])))
            start = None
    if start is not None:
        out.append((float(grid[start]), float(grid[-1])))
    return ParamIntervalSet.from_intervals(out, merge_eps)


def rasterize(intervals: ParamIntervalSet, grid: np.ndarray) -> np.ndarray:
    """Grid-sample membership mask; tolerance of half a grid step / 2."""
    eps = 0.25 * (grid[1] - grid[0]) if len(grid) > 1 else 1e-12
    mask = np.zeros(len(grid), dtype=bool)
    for a, b in intervals.intervals:
        mask |= (grid >= a - eps) & (grid <= b + eps)
    return mask


# -- feasibility sweep ---------------------------------------------------------

def sample_grid(resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    return np.linspace(0.0, 1.0, resolution)


def feasible_config(scene: Scene, robot_index: int, traj: ObjectTrajectory,
                    grasp: Grasp, t: float, warm: Config | None,
                    rng: np.random.Generator, seeds: int = 8,
                    opts: IkOptions = SWEEP_IK,
                    others: list[tuple[int, Config]] = ()) -> Config | None:
    """One whole-robot configuration realizing the grasp at t, or None.

    Platform candidates: the warm config's platform and the robot's current
    (initial) platform first, then the polar grid around the EE target.
    """
    robot = scene.robots[robot_index]
    target = ee_target(traj, grasp, t)
    object_pose = traj.pose_at(t)
    extra = []
    if warm is not None:
        extra.append(warm.platform)
    extra.append(robot.initial.platform)
    candidates = platform_candidates(robot.model, target, extra=extra)
    warm_arm = warm.arm if warm is not None else None
    for q_p in candidates:
        if not reach_prefilter(robot.model, q_p, target):
            continue
        base = arm_base(robot.model, q_p)
        local_target = compose(inverse(base), target)

        def collision_free(q_m, q_p=q_p):
            cfg = Config(q_p, q_m)
            return in_cfree(scene, robot_index, cfg, object_pose, others,
                            exempt_anchors=(target,))

        q_m = ik_arm_multiseed(robot.model.arm, local_target, warm_arm, rng,
                               seeds=seeds, opts=opts, accept=collision_free)
        if q_m is not None:
            return Config(q_p, q_m)
    return None


@dataclass(frozen=True)
class RobotCoverage:
    """ik_check output for one robot: per-grasp coverable segments."""

    robot_index: int
    resolution: int
    per_grasp: dict[str, ParamIntervalSet]
    union: ParamIntervalSet
    masks: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def covers_whole(self) -> bool:
        return self.union.covers_unit()


def ik_check(scene: Scene, robot_index: int, traj: ObjectTrajectory,
             grasps: list[Grasp], resolution: int = DEFAULT_RESOLUTION,
             seed: int = 0) -> RobotCoverage:
    """Per-grasp feasibility sweep: which parameter intervals each grasp covers.

    Deterministic for a fixed seed; grasps are processed in list order and
    samples in grid order with warm-started continuation (the robot's
    initial config seeds the first sample).  A backward repair pass retries
    samples that failed without a warm start but whose successor succeeded,
    which removes seed-luck false negatives at interval onsets.
    """
    grid = sample_grid(resolution)
    merge_eps = 1.0 / (2.0 * resolution)
    per_grasp: dict[str, ParamIntervalSet] = {}
    masks: dict[str, np.ndarray] = {}
    union = ParamIntervalSet.empty()
    initial = scene.robots[robot_index].initial
    for gi, grasp in enumerate(grasps):
        rng = np.random.default_rng([seed, robot_index, gi])
        mask = np.zeros(len(grid), dtype=bool)
        configs: list[Config | None] = [None] * len(grid)
        warm: Config | None = initial
        for k, t in enumerate(grid):
            found = feasible_config(scene, robot_index, traj, grasp, float(t),
                                    warm, rng)
            mask[k] = found is not None
            configs[k] = found
            warm = found if found is not None else warm
        repair_rng = np.random.default_rng([seed, robot_index, gi, 1])
        for k in range(len(grid) - 2, -1, -1):
            if not mask[k] and mask[k + 1]:
                found = feasible_config(scene, robot_index, traj, grasp,
                                        float(grid[k]), configs[k + 1],
                                        repair_rng)
                if found is not None:
                    mask[k] = True
                    configs[k] = found
        masks[grasp.id] = mask
        per_grasp[grasp.id] = intervals_from_mask(mask, grid, merge_eps)
        union = union.union(per_grasp[grasp.id])
    return RobotCoverage(robot_index, resolution, per_grasp, union, masks)
