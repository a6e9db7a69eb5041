"""Kinematics of one mobile manipulator.

A robot is a planar omnidirectional platform carrying a 6-revolute-joint
arm.  The platform contributes (x, y, theta); the arm contributes six
joint angles, tracked unwrapped in R with limits enforced in R (planning
by continuation needs the continuity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .geom import Pose, compose, rot_z

DEFAULT_SEED_COUNT = 8


@dataclass(frozen=True)
class RevoluteJoint:
    parent_offset: Pose
    axis: np.ndarray

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        norm = float(np.linalg.norm(ax))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"joint axis norm {norm} is not 1")
        object.__setattr__(self, "axis", ax)


@dataclass(frozen=True)
class ArmModel:
    """Six-revolute-joint serial chain plus a fixed tool transform."""

    joints: tuple[RevoluteJoint, ...]
    limits: np.ndarray
    tool: Pose
    # packed forms consumed by the kernels
    _offsets44: np.ndarray = field(init=False, repr=False, compare=False)
    _axes: np.ndarray = field(init=False, repr=False, compare=False)
    _tool44: np.ndarray = field(init=False, repr=False, compare=False)
    _limits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.joints) != 6:
            raise ValueError(f"expected 6 joints, got {len(self.joints)}")
        limits = np.asarray(self.limits, dtype=float).reshape(6, 2)
        if np.any(limits[:, 0] >= limits[:, 1]):
            raise ValueError("each joint limit must satisfy lo < hi")
        object.__setattr__(self, "limits", limits)
        offsets = np.ascontiguousarray(
            np.stack([j.parent_offset.matrix() for j in self.joints])
        )
        axes = np.ascontiguousarray(np.stack([j.axis for j in self.joints]))
        object.__setattr__(self, "_offsets44", offsets)
        object.__setattr__(self, "_axes", axes)
        object.__setattr__(self, "_tool44", np.ascontiguousarray(self.tool.matrix()))
        object.__setattr__(self, "_limits", np.ascontiguousarray(limits))

    @property
    def max_reach(self) -> float:
        """Upper bound on EE distance from the arm base (pruning only)."""
        reach = sum(float(np.linalg.norm(j.parent_offset.translation)) for j in self.joints)
        return reach + float(np.linalg.norm(self.tool.translation))

    def random_config(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.limits[:, 0], self.limits[:, 1])

    def within_limits(self, q_m: np.ndarray, tol: float = 1e-9) -> bool:
        q = np.asarray(q_m, dtype=float)
        return bool(
            np.all(q >= self.limits[:, 0] - tol) and np.all(q <= self.limits[:, 1] + tol)
        )


@dataclass(frozen=True)
class PlatformModel:
    """Planar platform: workspace box for (x, y) and a theta range."""

    mount: Pose
    bounds_x: tuple[float, float]
    bounds_y: tuple[float, float]
    bounds_theta: tuple[float, float]

    def within_bounds(self, q_p: np.ndarray, tol: float = 1e-9) -> bool:
        x, y, theta = q_p
        return (
            self.bounds_x[0] - tol <= x <= self.bounds_x[1] + tol
            and self.bounds_y[0] - tol <= y <= self.bounds_y[1] + tol
            and self.bounds_theta[0] - tol <= theta <= self.bounds_theta[1] + tol
        )

    def clamped(self, q_p: np.ndarray) -> "PlatformModel":
        """Copy with the workspace collapsed onto one platform pose."""
        x, y, theta = (float(v) for v in q_p)
        return PlatformModel(self.mount, (x, x), (y, y), (theta, theta))


@dataclass(frozen=True)
class RobotModel:
    name: str
    platform: PlatformModel
    arm: ArmModel


@dataclass(frozen=True)
class Config:
    """Whole-robot configuration: platform (x, y, theta) + 6 arm angles."""

    platform: np.ndarray
    arm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "platform", np.asarray(self.platform, dtype=float).reshape(3))
        object.__setattr__(self, "arm", np.asarray(self.arm, dtype=float).reshape(6))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.platform, self.arm])

    def is_valid(self, robot: RobotModel, tol: float = 1e-9) -> bool:
        return robot.platform.within_bounds(self.platform, tol) and robot.arm.within_limits(
            self.arm, tol
        )


# -- forward kinematics -------------------------------------------------------

def fk_platform(model: PlatformModel, q_p: np.ndarray) -> Pose:
    """World pose of the platform frame: z stays 0, rotation about world z."""
    x, y, theta = q_p
    return Pose(rot_z(theta), np.array([x, y, 0.0]))


def fk_arm(model: ArmModel, q_m: np.ndarray) -> Pose:
    mat = kernels.fk_arm(model._offsets44, model._axes, model._tool44,
                         np.asarray(q_m, dtype=float))
    return Pose(mat[:3, :3], mat[:3, 3])


def arm_link_frames(model: ArmModel, q_m: np.ndarray) -> np.ndarray:
    """(7,4,4): frame after each joint (links 1..6) then the EE frame."""
    return kernels.arm_frames(model._offsets44, model._axes, model._tool44,
                              np.asarray(q_m, dtype=float))


def arm_base(robot: RobotModel, q_p: np.ndarray) -> Pose:
    return compose(fk_platform(robot.platform, q_p), robot.platform.mount)


def fk(robot: RobotModel, q: Config) -> Pose:
    """World EE pose: platform, then mount, then arm chain."""
    return compose(arm_base(robot, q.platform), fk_arm(robot.arm, q.arm))


def jacobian_arm(model: ArmModel, q_m: np.ndarray) -> np.ndarray:
    """Geometric Jacobian in the arm base frame; rows (linear; angular)."""
    return kernels.jacobian_arm(model._offsets44, model._axes, model._tool44,
                                np.asarray(q_m, dtype=float))


def manipulability(model: ArmModel, q_m: np.ndarray) -> float:
    """sqrt(det(J Jt)); equals |det J| for the square 6x6 chain."""
    jac = jacobian_arm(model, q_m)
    return float(math.sqrt(max(np.linalg.det(jac @ jac.T), 0.0)))


# -- inverse kinematics -------------------------------------------------------

@dataclass(frozen=True)
class IkOptions:
    max_iters: int = 200
    pos_tol: float = 1e-6
    rot_tol: float = 1e-6
    damping: float = 1e-3
    step_clamp: float = 0.5


DEFAULT_IK = IkOptions()


def ik_arm(model: ArmModel, target: Pose, seed: np.ndarray,
           opts: IkOptions = DEFAULT_IK) -> np.ndarray | None:
    """Damped least-squares IK for the arm alone, target in the base frame.

    Returns None when the solver fails to converge within the limits; for a
    fixed (seed, opts) the outcome is deterministic.
    """
    q, ok = kernels.dls_ik(
        model._offsets44, model._axes, model._tool44, model._limits,
        np.asarray(seed, dtype=float), np.ascontiguousarray(target.matrix()),
        opts.pos_tol, opts.rot_tol, opts.damping, opts.max_iters, opts.step_clamp,
    )
    return q if ok else None


def ik_arm_multiseed(model: ArmModel, target: Pose, warm: np.ndarray | None,
                     rng: np.random.Generator, seeds: int = DEFAULT_SEED_COUNT,
                     opts: IkOptions = DEFAULT_IK,
                     accept=None) -> np.ndarray | None:
    """Existence-style IK: warm start plus random restarts within limits.

    ``accept`` optionally filters converged solutions (e.g. a collision
    check); the first accepted solution wins.
    """
    tried = 0
    if warm is not None:
        q = ik_arm(model, target, warm, opts)
        if q is not None and (accept is None or accept(q)):
            return q
        tried = 1
    for _ in range(max(0, seeds - tried)):
        q = ik_arm(model, target, model.random_config(rng), opts)
        if q is not None and (accept is None or accept(q)):
            return q
    return None


# -- platform redundancy sampling ---------------------------------------------

def platform_candidates(robot: RobotModel, target: Pose,
                        extra: list[np.ndarray] | None = None,
                        headings: int = 24, radii: int = 6) -> list[np.ndarray]:
    """Candidate platform poses on a polar grid around an EE target.

    The platform is placed so the arm base stands at a horizontal standoff
    from the target, heading toward it.  ``extra`` poses (current platform,
    warm starts) are emitted first; everything is filtered to the workspace
    bounds.
    """
    out: list[np.ndarray] = []
    seen: set[tuple[float, float, float]] = set()

    def push(q_p):
        q_p = np.asarray(q_p, dtype=float)
        if not robot.platform.within_bounds(q_p):
            return
        key = (round(q_p[0], 6), round(q_p[1], 6), round(q_p[2], 6))
        if key in seen:
            return
        seen.add(key)
        out.append(q_p)

    for q_p in extra or []:
        push(q_p)

    reach = robot.arm.max_reach
    mount_xy = robot.platform.mount.translation[:2]
    tx, ty = target.translation[:2]
    lo, hi = robot.platform.bounds_theta
    for r in np.linspace(0.3 * reach, 0.9 * reach, radii):
        for phi in np.linspace(0.0, 2.0 * math.pi, headings, endpoint=False):
            theta = math.atan2(math.sin(phi), math.cos(phi))
            # fold theta into the allowed range if a 2*pi shift helps
            if theta < lo:
                theta += 2.0 * math.pi
            elif theta > hi:
                theta -= 2.0 * math.pi
            c, s = math.cos(theta), math.sin(theta)
            base_x = tx - r * c
            base_y = ty - r * s
            px = base_x - (c * mount_xy[0] - s * mount_xy[1])
            py = base_y - (s * mount_xy[0] + c * mount_xy[1])
            push(np.array([px, py, theta]))
    return out


def reach_prefilter(robot: RobotModel, q_p: np.ndarray, target: Pose,
                    slack: float = 1.05) -> bool:
    """Cheap overestimate: can the arm base possibly reach the target?"""
    base = arm_base(robot, q_p)
    dist = float(np.linalg.norm(target.translation - base.translation))
    return dist <= slack * robot.arm.max_reach
