"""World model and the configuration validity predicate.

Collision geometry is capsule-only: robot links, platform, object and
obstacles all reduce to line segments with radii, so every pair query is
an exact segment-segment distance.  A configuration is valid when it is
inside joint/workspace limits and every non-exempt capsule pair keeps the
safety margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .geom import Pose, compose
from .model import Config, RobotModel, arm_base, arm_link_frames, fk_platform

DEFAULT_MARGIN = 0.005
DEFAULT_APPROACH_RADIUS = 0.10
# body ids: 0 platform, 1..6 arm links, 7 tool/gripper
_TOOL_BODY = 7


@dataclass(frozen=True)
class Capsule:
    """Segment with a radius, in the owning body's frame (meters)."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(3))
        if self.radius <= 0.0:
            raise ValueError("capsule radius must be positive")


def capsule_distance(a: Capsule, b: Capsule) -> float:
    """Surface distance between two posed capsules; negative = penetration."""
    d = kernels.segment_distance(
        np.ascontiguousarray(a.p0), np.ascontiguousarray(a.p1),
        np.ascontiguousarray(b.p0), np.ascontiguousarray(b.p1),
    )
    return float(d) - a.radius - b.radius


def posed_capsule(c: Capsule, pose: Pose) -> Capsule:
    return Capsule(pose.apply(c.p0), pose.apply(c.p1), c.radius)


def _stack(capsules) -> tuple[np.ndarray, np.ndarray]:
    if not capsules:
        return np.zeros((0, 6)), np.zeros(0)
    segs = np.ascontiguousarray(
        [np.concatenate([c.p0, c.p1]) for c in capsules], dtype=float
    )
    radii = np.ascontiguousarray([c.radius for c in capsules], dtype=float)
    return segs, radii


@dataclass(frozen=True)
class RobotGeometry:
    """Collision capsules per rigid body of one robot."""

    platform: tuple[Capsule, ...] = ()
    links: tuple[tuple[Capsule, ...], ...] = ((),) * 6
    tool: tuple[Capsule, ...] = ()

    def __post_init__(self):
        if len(self.links) != 6:
            raise ValueError("links must list capsules for exactly 6 bodies")


@dataclass(frozen=True)
class SceneRobot:
    model: RobotModel
    initial: Config
    geometry: RobotGeometry
    # packed capsule arrays, filled on construction
    _p0: np.ndarray = field(init=False, repr=False, compare=False)
    _p1: np.ndarray = field(init=False, repr=False, compare=False)
    _radii: np.ndarray = field(init=False, repr=False, compare=False)
    _body: np.ndarray = field(init=False, repr=False, compare=False)
    _self_a: np.ndarray = field(init=False, repr=False, compare=False)
    _self_b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        caps: list[Capsule] = []
        body: list[int] = []
        for c in self.geometry.platform:
            caps.append(c)
            body.append(0)
        for li, link in enumerate(self.geometry.links):
            for c in link:
                caps.append(c)
                body.append(1 + li)
        for c in self.geometry.tool:
            caps.append(c)
            body.append(_TOOL_BODY)
        n = len(caps)
        p0 = np.zeros((n, 3))
        p1 = np.zeros((n, 3))
        radii = np.zeros(n)
        for i, c in enumerate(caps):
            p0[i] = c.p0
            p1[i] = c.p1
            radii[i] = c.radius
        body_arr = np.asarray(body, dtype=np.int64)
        # self-collision pairs: bodies at least two joints apart
        ia, ib = [], []
        for i in range(n):
            for j in range(i + 1, n):
                if abs(int(body_arr[i]) - int(body_arr[j])) >= 2:
                    ia.append(i)
                    ib.append(j)
        object.__setattr__(self, "_p0", np.ascontiguousarray(p0))
        object.__setattr__(self, "_p1", np.ascontiguousarray(p1))
        object.__setattr__(self, "_radii", np.ascontiguousarray(radii))
        object.__setattr__(self, "_body", body_arr)
        object.__setattr__(self, "_self_a", np.asarray(ia, dtype=np.int64))
        object.__setattr__(self, "_self_b", np.asarray(ib, dtype=np.int64))


@dataclass(frozen=True)
class ObjectModel:
    """Manipulated object: reporting box plus its collision capsules."""

    half_extents: np.ndarray
    capsules: tuple[Capsule, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=float).reshape(3)
        )


@dataclass(frozen=True)
class Scene:
    robots: tuple[SceneRobot, ...]
    obj: ObjectModel
    obstacles: tuple[Capsule, ...] = ()
    floor_z: float | None = 0.0
    leader: int = 0
    margin: float = DEFAULT_MARGIN
    approach_radius: float = DEFAULT_APPROACH_RADIUS
    _obj_segs: np.ndarray = field(init=False, repr=False, compare=False)
    _obj_radii: np.ndarray = field(init=False, repr=False, compare=False)
    _obs_segs: np.ndarray = field(init=False, repr=False, compare=False)
    _obs_radii: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.robots) < 1:
            raise ValueError("scene needs at least one robot")
        if not 0 <= self.leader < len(self.robots):
            raise ValueError(f"leader index {self.leader} out of range")
        segs, radii = _stack(self.obj.capsules)
        object.__setattr__(self, "_obj_segs", segs)
        object.__setattr__(self, "_obj_radii", radii)
        segs, radii = _stack(self.obstacles)
        object.__setattr__(self, "_obs_segs", segs)
        object.__setattr__(self, "_obs_radii", radii)

    @property
    def n_robots(self) -> int:
        return len(self.robots)


def robot_world_capsules(robot: SceneRobot, q: Config) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-frame capsule segments, radii and body ids for one posed robot."""
    platform_pose = fk_platform(robot.model.platform, q.platform)
    base = compose(platform_pose, robot.model.platform.mount)
    frames = arm_link_frames(robot.model.arm, q.arm)
    world = np.empty((8, 4, 4))
    world[0] = platform_pose.matrix()
    world[1:] = base.matrix() @ frames
    rot = world[robot._body, :3, :3]
    trans = world[robot._body, :3, 3]
    p0 = np.einsum("nij,nj->ni", rot, robot._p0) + trans
    p1 = np.einsum("nij,nj->ni", rot, robot._p1) + trans
    segs = np.ascontiguousarray(np.hstack([p0, p1]))
    return segs, robot._radii, robot._body


def object_world_capsules(scene: Scene, object_pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    if scene._obj_segs.shape[0] == 0:
        return scene._obj_segs, scene._obj_radii
    p0 = object_pose.apply(scene._obj_segs[:, :3])
    p1 = object_pose.apply(scene._obj_segs[:, 3:])
    return np.ascontiguousarray(np.hstack([p0, p1])), scene._obj_radii


def _ee_world_position(robot: SceneRobot, q: Config) -> np.ndarray:
    base = arm_base(robot.model, q.platform)
    frames = arm_link_frames(robot.model.arm, q.arm)
    return base.apply(frames[6][:3, 3])


def validity_violations(scene: Scene, robot_index: int, q: Config,
                        object_pose: Pose | None,
                        others: list[tuple[int, Config]] = (),
                        exempt_anchors: tuple[Pose, ...] = (),
                        margin: float | None = None) -> list[str]:
    """All reasons the configuration is outside C_free (empty = valid)."""
    if margin is None:
        margin = scene.margin
    robot = scene.robots[robot_index]
    out: list[str] = []
    if not q.is_valid(robot.model):
        out.append("limits")
        return out

    segs, radii, body = robot_world_capsules(robot, q)

    if robot._self_a.shape[0]:
        clear = kernels.pairs_min_clearance(segs, radii, robot._self_a, robot._self_b, margin)
        if clear < margin:
            out.append("self")

    if scene.floor_z is not None and segs.shape[0]:
        lowest = np.minimum(segs[:, 2], segs[:, 5]) - radii
        if float(lowest.min()) - scene.floor_z < margin:
            out.append("floor")

    if object_pose is not None and scene._obj_segs.shape[0] and segs.shape[0]:
        obj_segs, obj_radii = object_world_capsules(scene, object_pose)
        exempt_tool = False
        if exempt_anchors:
            ee = _ee_world_position(robot, q)
            limit = 1.2 * scene.approach_radius
            exempt_tool = any(
                float(np.linalg.norm(ee - a.translation)) <= limit for a in exempt_anchors
            )
        mask = body != _TOOL_BODY if exempt_tool else slice(None)
        check_segs = np.ascontiguousarray(segs[mask])
        check_radii = np.ascontiguousarray(radii[mask])
        if check_segs.shape[0]:
            clear = kernels.cross_min_clearance(check_segs, check_radii, obj_segs, obj_radii, margin)
            if clear < margin:
                out.append("object")

    if scene._obs_segs.shape[0] and segs.shape[0]:
        clear = kernels.cross_min_clearance(segs, radii, scene._obs_segs, scene._obs_radii, margin)
        if clear < margin:
            out.append("obstacle")

    for other_index, other_q in others:
        if other_index == robot_index:
            continue
        other_segs, other_radii, _ = robot_world_capsules(scene.robots[other_index], other_q)
        if other_segs.shape[0] and segs.shape[0]:
            clear = kernels.cross_min_clearance(segs, radii, other_segs, other_radii, margin)
            if clear < margin:
                out.append(f"robot:{other_index}")
    return out


def in_cfree(scene: Scene, robot_index: int, q: Config,
             object_pose: Pose | None,
             others: list[tuple[int, Config]] = (),
             exempt_anchors: tuple[Pose, ...] = (),
             margin: float | None = None) -> bool:
    """True iff the configuration is in C_free for this robot."""
    return not validity_violations(
        scene, robot_index, q, object_pose, others, exempt_anchors, margin
    )
