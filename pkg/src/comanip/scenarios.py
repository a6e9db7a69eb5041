"""Built-in scenario scenes used by the regression runner and tests.

Three fixtures at desk scale (arms with ~0.9 m reach on omnidirectional
platforms):

* chair flip: two robots tumble a square board through a large
  reorientation; every grasp needs platform motion to cover the whole
  trajectory, so clamping the platforms forces regrasps or infeasibility.
* desk flip: three robots roll a desk (tabletop plus a modesty panel)
  upside down.  At low height the panel-side robot's edge grasp dies
  mid-trajectory and exactly one regrasp is needed; at high height the
  same grasp survives the under-swing.
* unreachable: a mid-trajectory waypoint far above every arm's reach.
"""

from __future__ import annotations

import copy

import numpy as np

from .files import FORMAT_VERSION

ARM_JOINTS = [
    {"offset": {"xyz": [0.0, 0.0, 0.10], "rpy_deg": [0, 0, 0]}, "axis": [0, 0, 1]},
    {"offset": {"xyz": [0.0, 0.0, 0.10], "rpy_deg": [0, 0, 0]}, "axis": [0, 1, 0]},
    {"offset": {"xyz": [0.0, 0.0, 0.30], "rpy_deg": [0, 0, 0]}, "axis": [0, 1, 0]},
    {"offset": {"xyz": [0.0, 0.0, 0.30], "rpy_deg": [0, 0, 0]}, "axis": [0, 0, 1]},
    {"offset": {"xyz": [0.0, 0.0, 0.10], "rpy_deg": [0, 0, 0]}, "axis": [0, 1, 0]},
    {"offset": {"xyz": [0.0, 0.0, 0.10], "rpy_deg": [0, 0, 0]}, "axis": [0, 0, 1]},
]

ROBOT_CAPSULES = {
    "platform": [
        {"p0": [-0.15, 0.0, 0.16], "p1": [0.15, 0.0, 0.16], "radius": 0.13},
    ],
    "links": [
        [],
        [{"p0": [0.0, 0.0, 0.02], "p1": [0.0, 0.0, 0.26], "radius": 0.05}],
        [{"p0": [0.0, 0.0, 0.03], "p1": [0.0, 0.0, 0.27], "radius": 0.045}],
        [],
        [],
        [],
    ],
    "tool": [
        {"p0": [0.0, 0.0, -0.10], "p1": [0.0, 0.0, -0.02], "radius": 0.04},
    ],
}


def robot_dict(name: str, x: float, y: float, theta_deg: float,
               workspace: float = 3.0) -> dict:
    return {
        "name": name,
        "mount": {"xyz": [0.0, 0.0, 0.35], "rpy_deg": [0, 0, 0]},
        "joints": copy.deepcopy(ARM_JOINTS),
        "limits_deg": [[-170.0, 170.0]] * 6,
        "tool": {"xyz": [0.0, 0.0, 0.12], "rpy_deg": [0, 0, 0]},
        "platform_bounds": {
            "x": [-workspace, workspace],
            "y": [-workspace, workspace],
            "theta_deg": [-360.0, 360.0],
        },
        "initial_config": {
            "platform": [x, y, theta_deg],
            "arm_deg": [0.0, 40.0, -70.0, 0.0, 40.0, 0.0],
        },
        "capsules": copy.deepcopy(ROBOT_CAPSULES),
    }


def _pose(xyz, rpy):
    return {"xyz": list(map(float, xyz)), "rpy_deg": list(map(float, rpy))}


def chair_scene(height: float = 0.75) -> dict:
    """Two robots flip a square board through a large reorientation."""
    half = 0.35
    standoff = half + 0.025
    board_capsules = [
        {"p0": [-0.3, yk, 0.0], "p1": [0.3, yk, 0.0], "radius": 0.05}
        for yk in (-0.25, 0.0, 0.25)
    ]
    return {
        "format_version": FORMAT_VERSION,
        "scene": {
            "leader": 0,
            "margin": 0.005,
            "approach_radius": 0.10,
            "floor_z": 0.0,
            "robots": [
                robot_dict("left", -0.95, 0.0, 0.0),
                robot_dict("right", 0.95, 0.0, 180.0),
            ],
            "object": {"half_extents": [half, half, 0.05],
                       "capsules": board_capsules},
            "obstacles": [],
        },
        "trajectory": {
            "waypoints": [
                {"t": 0.0, "pose": _pose([0.0, 0.0, height], [90.0, 0.0, 0.0])},
                {"t": 1.0, "pose": _pose([0.0, 0.0, height], [-180.0, 45.0, 90.0])},
            ]
        },
        "grasps": [
            {"id": "left_edge", "pose": _pose([-standoff, 0.0, 0.0], [0.0, 90.0, 0.0])},
            {"id": "right_edge", "pose": _pose([standoff, 0.0, 0.0], [0.0, -90.0, 0.0])},
            {"id": "front_edge", "pose": _pose([0.0, -standoff, 0.0], [-90.0, 0.0, 0.0])},
            {"id": "back_edge", "pose": _pose([0.0, standoff, 0.0], [90.0, 0.0, 0.0])},
        ],
    }


def desk_scene(clearance: str = "low") -> dict:
    """Three robots roll a desk (top + modesty panel) upside down.

    ``clearance`` picks the trajectory height: 'high' leaves room for the
    panel-side edge grasp to swing underneath; 'low' does not.
    """
    if clearance not in ("high", "low"):
        raise ValueError("clearance must be 'high' or 'low'")
    height = 0.92 if clearance == "high" else 0.62
    top_y = 0.35
    apron_y = 0.20
    apron_x = 0.38
    # dense rows: a solid slab, nothing squeezes between capsules
    top_capsules = [
        {"p0": [-0.45, yk, 0.0], "p1": [0.45, yk, 0.0], "radius": 0.045}
        for yk in np.linspace(-0.32, 0.32, 9)
    ]
    # four aprons sealing the under-desk cavity
    apron_capsules = []
    for zk in (0.10, 0.21, 0.32):
        for sy in (-1.0, 1.0):
            apron_capsules.append(
                {"p0": [-apron_x, sy * apron_y, -zk],
                 "p1": [apron_x, sy * apron_y, -zk], "radius": 0.04}
            )
        for sx in (-1.0, 1.0):
            apron_capsules.append(
                {"p0": [sx * apron_x, -apron_y, -zk],
                 "p1": [sx * apron_x, apron_y, -zk], "radius": 0.04}
            )
    return {
        "format_version": FORMAT_VERSION,
        "scene": {
            "leader": 0,
            "margin": 0.005,
            "approach_radius": 0.10,
            "floor_z": 0.0,
            "robots": [
                robot_dict("end_xm", -1.1, 0.0, 0.0),
                robot_dict("end_xp", 1.1, 0.0, 180.0),
                robot_dict("side_ym", 0.0, -1.0, 90.0),
            ],
            "object": {"half_extents": [0.5, top_y, 0.02],
                       "capsules": top_capsules + apron_capsules},
            "obstacles": [],
        },
        "trajectory": {
            "waypoints": [
                {"t": 0.0, "pose": _pose([0.0, 0.0, height], [0.0, 0.0, 0.0])},
                {"t": 1.0, "pose": _pose([0.0, 0.0, height], [180.0, 0.0, 0.0])},
            ]
        },
        "grasps": [
            {"id": "end_xm", "pose": _pose([-0.54, 0.0, 0.0], [0.0, 90.0, 0.0])},
            {"id": "end_xp", "pose": _pose([0.54, 0.0, 0.0], [0.0, -90.0, 0.0])},
            {"id": "edge_ym", "pose": _pose([0.0, -(top_y + 0.04), 0.0],
                                            [-90.0, 0.0, 0.0])},
            {"id": "bot_face", "pose": _pose([0.0, 0.0, -0.065], [0.0, 0.0, 0.0])},
        ],
    }


def unreachable_scene() -> dict:
    """Chair scene with a mid-trajectory waypoint far above every arm."""
    doc = chair_scene()
    waypoints = doc["trajectory"]["waypoints"]
    doc["trajectory"]["waypoints"] = [
        waypoints[0],
        {"t": 0.5, "pose": _pose([0.0, 0.0, 3.5], [0.0, 20.0, 40.0])},
        waypoints[1],
    ]
    return doc


BUILTIN_SCENES = {
    "chair": chair_scene,
    "desk_low": lambda: desk_scene("low"),
    "desk_high": lambda: desk_scene("high"),
    "unreachable": unreachable_scene,
}


def clamp_platforms(doc: dict) -> dict:
    """Scene copy with every platform workspace collapsed onto its start pose."""
    out = copy.deepcopy(doc)
    for robot in out["scene"]["robots"]:
        x, y, theta_deg = robot["initial_config"]["platform"]
        robot["platform_bounds"] = {
            "x": [x, x], "y": [y, y], "theta_deg": [theta_deg, theta_deg],
        }
    return out
