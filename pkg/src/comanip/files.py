"""File formats: scene input, coverage/assignment/plan/trace artifacts.

Scene files are human-facing (lengths in meters, angles in degrees);
emitted artifacts are machine-facing (radians) and written canonically:
sorted keys, floats at 17 significant digits, so reruns with the same
seed are byte-identical.  Every artifact carries format_version and kind.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .assign import Assignment, CoverScheme, RegraspEvent, Segment
from .coverage import Grasp, ObjectTrajectory, ParamIntervalSet, RobotCoverage
from .execution import Disturbance, ExecutionTrace, Fault
from .geom import Pose, pose_from_xyz_rpy, rpy_deg_from_matrix
from .model import ArmModel, Config, PlatformModel, RevoluteJoint, RobotModel
from .plan import Knot, MultiRobotPlan, RegraspBlock, RobotTrajectory
from .scene import Capsule, ObjectModel, RobotGeometry, Scene, SceneRobot

FORMAT_VERSION = 1


class SceneFormatError(Exception):
    """Malformed input file; the message names the offending path."""


# -- canonical JSON -----------------------------------------------------------

def _write_value(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            raise ValueError("non-finite float in artifact")
        out.append(format(v, ".17g"))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _write_value(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        for i, item in enumerate(seq):
            if i:
                out.append(",")
            _write_value(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def canonical_json(value: Any) -> str:
    """Deterministic JSON: sorted keys, floats as %.17g (lossless)."""
    out: list[str] = []
    _write_value(value, out)
    out.append("\n")
    return "".join(out)


def write_artifact(path: str, value: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(value))


def read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as err:
        raise SceneFormatError(f"{path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise SceneFormatError(f"{path}: invalid JSON ({err})") from None


# -- schema helpers -----------------------------------------------------------

def _get(node: Any, key: str, path: str, kind: type | tuple = None):
    if not isinstance(node, dict):
        raise SceneFormatError(f"{path}: expected an object")
    if key not in node:
        raise SceneFormatError(f"{path}.{key}: missing")
    value = node[key]
    if kind is not None and not isinstance(value, kind):
        raise SceneFormatError(f"{path}.{key}: wrong type")
    return value


def _floats(node: Any, n: int, path: str) -> np.ndarray:
    if not isinstance(node, list) or len(node) != n:
        raise SceneFormatError(f"{path}: expected a list of {n} numbers")
    try:
        return np.array([float(v) for v in node])
    except (TypeError, ValueError):
        raise SceneFormatError(f"{path}: expected numbers") from None


def _pose_from_json(node: Any, path: str) -> Pose:
    xyz = _floats(_get(node, "xyz", path), 3, f"{path}.xyz")
    rpy = _floats(_get(node, "rpy_deg", path), 3, f"{path}.rpy_deg")
    return pose_from_xyz_rpy(xyz, rpy)


def pose_to_json(pose: Pose) -> dict:
    return {
        "xyz": [float(v) for v in pose.translation],
        "rpy_deg": [float(v) for v in rpy_deg_from_matrix(pose.rotation)],
    }


def _capsule_from_json(node: Any, path: str) -> Capsule:
    p0 = _floats(_get(node, "p0", path), 3, f"{path}.p0")
    p1 = _floats(_get(node, "p1", path), 3, f"{path}.p1")
    radius = _get(node, "radius", path, (int, float))
    try:
        return Capsule(p0, p1, float(radius))
    except ValueError as err:
        raise SceneFormatError(f"{path}: {err}") from None


def capsule_to_json(c: Capsule) -> dict:
    return {"p0": list(map(float, c.p0)), "p1": list(map(float, c.p1)),
            "radius": float(c.radius)}


def _capsule_list(node: Any, path: str) -> tuple[Capsule, ...]:
    if not isinstance(node, list):
        raise SceneFormatError(f"{path}: expected a list")
    return tuple(_capsule_from_json(c, f"{path}[{i}]") for i, c in enumerate(node))


# -- scene file ---------------------------------------------------------------

def _robot_from_json(node: Any, path: str) -> SceneRobot:
    name = _get(node, "name", path, str)
    mount = _pose_from_json(_get(node, "mount", path), f"{path}.mount")
    joints_node = _get(node, "joints", path, list)
    if len(joints_node) != 6:
        raise SceneFormatError(f"{path}.joints: expected exactly 6 joints")
    joints = []
    for i, jn in enumerate(joints_node):
        jpath = f"{path}.joints[{i}]"
        offset = _pose_from_json(_get(jn, "offset", jpath), f"{jpath}.offset")
        axis = _floats(_get(jn, "axis", jpath), 3, f"{jpath}.axis")
        try:
            joints.append(RevoluteJoint(offset, axis))
        except ValueError as err:
            raise SceneFormatError(f"{jpath}: {err}") from None
    limits_node = _get(node, "limits_deg", path, list)
    if len(limits_node) != 6:
        raise SceneFormatError(f"{path}.limits_deg: expected 6 pairs")
    limits = np.radians(
        np.array([_floats(p, 2, f"{path}.limits_deg[{i}]")
                  for i, p in enumerate(limits_node)])
    )
    tool = _pose_from_json(_get(node, "tool", path), f"{path}.tool")
    try:
        arm = ArmModel(tuple(joints), limits, tool)
    except ValueError as err:
        raise SceneFormatError(f"{path}: {err}") from None

    bounds = _get(node, "platform_bounds", path, dict)
    bx = _floats(_get(bounds, "x", f"{path}.platform_bounds"), 2,
                 f"{path}.platform_bounds.x")
    by = _floats(_get(bounds, "y", f"{path}.platform_bounds"), 2,
                 f"{path}.platform_bounds.y")
    btheta = np.radians(_floats(_get(bounds, "theta_deg", f"{path}.platform_bounds"),
                                2, f"{path}.platform_bounds.theta_deg"))
    platform = PlatformModel(mount, (bx[0], bx[1]), (by[0], by[1]),
                             (btheta[0], btheta[1]))

    init = _get(node, "initial_config", path, dict)
    plat = _floats(_get(init, "platform", f"{path}.initial_config"), 3,
                   f"{path}.initial_config.platform")
    plat[2] = math.radians(plat[2])
    arm_deg = _floats(_get(init, "arm_deg", f"{path}.initial_config"), 6,
                      f"{path}.initial_config.arm_deg")
    initial = Config(plat, np.radians(arm_deg))

    caps = _get(node, "capsules", path, dict)
    links_node = _get(caps, "links", f"{path}.capsules", list)
    if len(links_node) != 6:
        raise SceneFormatError(f"{path}.capsules.links: expected 6 entries")
    geometry = RobotGeometry(
        platform=_capsule_list(_get(caps, "platform", f"{path}.capsules"),
                               f"{path}.capsules.platform"),
        links=tuple(_capsule_list(l, f"{path}.capsules.links[{i}]")
                    for i, l in enumerate(links_node)),
        tool=_capsule_list(_get(caps, "tool", f"{path}.capsules"),
                           f"{path}.capsules.tool"),
    )
    model = RobotModel(name, platform, arm)
    return SceneRobot(model, initial, geometry)


def scene_from_json(doc: Any, path: str = "$") -> tuple[Scene, ObjectTrajectory, list[Grasp]]:
    version = _get(doc, "format_version", path, int)
    if version != FORMAT_VERSION:
        raise SceneFormatError(f"{path}.format_version: unsupported ({version})")
    scene_node = _get(doc, "scene", path, dict)
    spath = f"{path}.scene"
    robots_node = _get(scene_node, "robots", spath, list)
    if not robots_node:
        raise SceneFormatError(f"{spath}.robots: need at least one robot")
    robots = tuple(_robot_from_json(r, f"{spath}.robots[{i}]")
                   for i, r in enumerate(robots_node))

    obj_node = _get(scene_node, "object", spath, dict)
    obj = ObjectModel(
        half_extents=_floats(_get(obj_node, "half_extents", f"{spath}.object"),
                             3, f"{spath}.object.half_extents"),
        capsules=_capsule_list(_get(obj_node, "capsules", f"{spath}.object"),
                               f"{spath}.object.capsules"),
    )
    obstacles = _capsule_list(scene_node.get("obstacles", []), f"{spath}.obstacles")
    floor_z = scene_node.get("floor_z", 0.0)
    if floor_z is not None:
        floor_z = float(floor_z)
    leader = _get(scene_node, "leader", spath, int)
    margin = float(scene_node.get("margin", 0.005))
    approach = float(scene_node.get("approach_radius", 0.10))
    try:
        scene = Scene(robots, obj, obstacles, floor_z, leader, margin, approach)
    except ValueError as err:
        raise SceneFormatError(f"{spath}: {err}") from None

    traj_node = _get(doc, "trajectory", path, dict)
    wps_node = _get(traj_node, "waypoints", f"{path}.trajectory", list)
    waypoints = []
    for i, wn in enumerate(wps_node):
        wpath = f"{path}.trajectory.waypoints[{i}]"
        t = _get(wn, "t", wpath, (int, float))
        pose = _pose_from_json(_get(wn, "pose", wpath), f"{wpath}.pose")
        waypoints.append((float(t), pose))
    try:
        traj = ObjectTrajectory(tuple(waypoints))
    except ValueError as err:
        raise SceneFormatError(f"{path}.trajectory: {err}") from None

    grasps_node = _get(doc, "grasps", path, list)
    grasps = []
    for i, gn in enumerate(grasps_node):
        gpath = f"{path}.grasps[{i}]"
        gid = _get(gn, "id", gpath, str)
        pose = _pose_from_json(_get(gn, "pose", gpath), f"{gpath}.pose")
        grasps.append(Grasp(gid, pose))
    if len({g.id for g in grasps}) != len(grasps):
        raise SceneFormatError(f"{path}.grasps: duplicate grasp ids")
    return scene, traj, grasps


def load_scene(path: str) -> tuple[Scene, ObjectTrajectory, list[Grasp]]:
    return scene_from_json(read_json(path), path="$")


# -- coverage report ----------------------------------------------------------

def _intervals_json(s: ParamIntervalSet) -> list:
    return [[float(a), float(b)] for a, b in s.intervals]


def coverage_to_json(coverages: list[RobotCoverage], leader: int, seed: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "coverage",
        "resolution": coverages[0].resolution,
        "seed": seed,
        "leader": leader,
        "covers_all_robots": all(c.covers_whole() for c in coverages),
        "robots": [
            {
                "robot": cov.robot_index,
                "covers_whole": cov.covers_whole(),
                "union": _intervals_json(cov.union),
                "uncovered": _intervals_json(cov.union.complement()),
                "grasps": [
                    {"id": gid, "intervals": _intervals_json(ivs)}
                    for gid, ivs in cov.per_grasp.items()
                ],
            }
            for cov in coverages
        ],
    }


def coverage_from_json(doc: Any, path: str = "$") -> tuple[list[RobotCoverage], int]:
    if _get(doc, "kind", path, str) != "coverage":
        raise SceneFormatError(f"{path}.kind: expected 'coverage'")
    resolution = _get(doc, "resolution", path, int)
    merge_eps = 1.0 / (2.0 * resolution)
    out = []
    for i, rn in enumerate(_get(doc, "robots", path, list)):
        rpath = f"{path}.robots[{i}]"
        per_grasp = {}
        union = ParamIntervalSet.empty()
        for j, gn in enumerate(_get(rn, "grasps", rpath, list)):
            gpath = f"{rpath}.grasps[{j}]"
            gid = _get(gn, "id", gpath, str)
            ivs = ParamIntervalSet.from_intervals(
                [(float(a), float(b)) for a, b in _get(gn, "intervals", gpath, list)],
                merge_eps,
            )
            per_grasp[gid] = ivs
            union = union.union(ivs)
        out.append(RobotCoverage(_get(rn, "robot", rpath, int), resolution,
                                 per_grasp, union))
    return out, _get(doc, "leader", path, int)


# -- assignment ---------------------------------------------------------------

def assignment_to_json(assignment: Assignment, resolution: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "assignment",
        "resolution": resolution,
        "total_regrasps": assignment.total_regrasps,
        "rank": assignment.rank,
        "optimal": assignment.optimal,
        "schemes": [
            {
                "robot": s.owner,
                "segments": [
                    {"grasp": seg.grasp_id, "start": seg.start, "end": seg.end,
                     "start_index": seg.start_index, "end_index": seg.end_index}
                    for seg in s.segments
                ],
            }
            for s in assignment.schemes
        ],
        "regrasp_events": [
            {"robot": e.robot, "t": e.t, "grid_index": e.grid_index,
             "from_grasp": e.from_grasp, "to_grasp": e.to_grasp}
            for e in assignment.regrasp_events
        ],
    }


def assignment_from_json(doc: Any, path: str = "$") -> tuple[Assignment, int]:
    if _get(doc, "kind", path, str) != "assignment":
        raise SceneFormatError(f"{path}.kind: expected 'assignment'")
    schemes = []
    for i, sn in enumerate(_get(doc, "schemes", path, list)):
        spath = f"{path}.schemes[{i}]"
        segments = tuple(
            Segment(
                grasp_id=_get(seg, "grasp", f"{spath}.segments[{j}]", str),
                start=float(_get(seg, "start", f"{spath}.segments[{j}]", (int, float))),
                end=float(_get(seg, "end", f"{spath}.segments[{j}]", (int, float))),
                start_index=_get(seg, "start_index", f"{spath}.segments[{j}]", int),
                end_index=_get(seg, "end_index", f"{spath}.segments[{j}]", int),
            )
            for j, seg in enumerate(_get(sn, "segments", spath, list))
        )
        schemes.append(CoverScheme(_get(sn, "robot", spath, int), segments))
    events = tuple(
        RegraspEvent(
            robot=_get(e, "robot", f"{path}.regrasp_events[{i}]", int),
            t=float(_get(e, "t", f"{path}.regrasp_events[{i}]", (int, float))),
            grid_index=_get(e, "grid_index", f"{path}.regrasp_events[{i}]", int),
            from_grasp=_get(e, "from_grasp", f"{path}.regrasp_events[{i}]", str),
            to_grasp=_get(e, "to_grasp", f"{path}.regrasp_events[{i}]", str),
        )
        for i, e in enumerate(_get(doc, "regrasp_events", path, list))
    )
    assignment = Assignment(tuple(schemes), events, _get(doc, "rank", path, int),
                            bool(_get(doc, "optimal", path, bool)))
    return assignment, _get(doc, "resolution", path, int)


# -- plan -----------------------------------------------------------------------

def _config_json(c: Config) -> dict:
    return {"platform": [float(v) for v in c.platform],
            "arm": [float(v) for v in c.arm]}


def plan_to_json(plan: MultiRobotPlan) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "plan",
        "resolution": plan.resolution,
        "seed": plan.seed,
        "xi": plan.xi,
        "total_regrasps": plan.total_regrasps,
        "t": [float(v) for v in plan.t],
        "robots": [
            {
                "robot": rt.robot_index,
                "knots": [
                    {
                        "t": k.t,
                        "platform": [float(v) for v in k.config.platform],
                        "arm": [float(v) for v in k.config.arm],
                        "grasp": k.grasp_id,
                        "event": k.event,
                    }
                    for k in rt.knots
                ],
            }
            for rt in plan.trajectories
        ],
        "blocks": [
            {"robot": b.robot, "grid_index": b.grid_index,
             "start_step": b.start_step, "end_step": b.end_step,
             "from_grasp": b.from_grasp, "to_grasp": b.to_grasp}
            for b in plan.blocks
        ],
        "assignment": assignment_to_json(plan.assignment, plan.resolution),
        "diagnostics": plan.diagnostics,
    }


def plan_from_json(doc: Any, path: str = "$") -> MultiRobotPlan:
    if _get(doc, "kind", path, str) != "plan":
        raise SceneFormatError(f"{path}.kind: expected 'plan'")
    assignment, resolution = assignment_from_json(
        _get(doc, "assignment", path, dict), f"{path}.assignment"
    )
    trajectories = []
    xi = float(_get(doc, "xi", path, (int, float)))
    for i, rn in enumerate(_get(doc, "robots", path, list)):
        rpath = f"{path}.robots[{i}]"
        knots = []
        for j, kn in enumerate(_get(rn, "knots", rpath, list)):
            kpath = f"{rpath}.knots[{j}]"
            config = Config(
                _floats(_get(kn, "platform", kpath), 3, f"{kpath}.platform"),
                _floats(_get(kn, "arm", kpath), 6, f"{kpath}.arm"),
            )
            grasp = kn.get("grasp")
            event = _get(kn, "event", kpath, str)
            knots.append(Knot(float(_get(kn, "t", kpath, (int, float))), config,
                              grasp, event))
        trajectories.append(RobotTrajectory(_get(rn, "robot", rpath, int),
                                            tuple(knots), xi))
    blocks = tuple(
        RegraspBlock(
            robot=_get(b, "robot", f"{path}.blocks[{i}]", int),
            grid_index=_get(b, "grid_index", f"{path}.blocks[{i}]", int),
            start_step=_get(b, "start_step", f"{path}.blocks[{i}]", int),
            end_step=_get(b, "end_step", f"{path}.blocks[{i}]", int),
            from_grasp=_get(b, "from_grasp", f"{path}.blocks[{i}]", str),
            to_grasp=_get(b, "to_grasp", f"{path}.blocks[{i}]", str),
        )
        for i, b in enumerate(_get(doc, "blocks", path, list))
    )
    return MultiRobotPlan(
        trajectories=tuple(trajectories),
        t=tuple(float(v) for v in _get(doc, "t", path, list)),
        blocks=blocks,
        assignment=assignment,
        resolution=resolution,
        seed=_get(doc, "seed", path, int),
        xi=xi,
        diagnostics=doc.get("diagnostics", {}),
    )


def load_plan(path: str) -> MultiRobotPlan:
    return plan_from_json(read_json(path), path="$")


# -- trace ----------------------------------------------------------------------

def trace_to_json(trace: ExecutionTrace) -> dict:
    def residual(v):
        return None if math.isnan(v) else float(v)

    return {
        "format_version": FORMAT_VERSION,
        "kind": "trace",
        "leader": trace.leader,
        "disturbance": {"platform": trace.disturbance.platform,
                        "arm": trace.disturbance.arm,
                        "seed": trace.disturbance.seed},
        "t": [float(v) for v in trace.t],
        "robots": [
            {
                "robot": r,
                "configs": [_config_json(c) for c in trace.actual[r]],
                "residual_pos": [residual(v) for v in trace.residual_pos[r]],
                "residual_rot": [residual(v) for v in trace.residual_rot[r]],
            }
            for r in range(len(trace.actual))
        ],
        "object_poses": [pose_to_json(p) for p in trace.object_poses],
        "faults": [{"step": f.step, "robot": f.robot, "reason": f.reason}
                   for f in trace.faults],
        "summary": trace.summary(),
    }


# -- CSV exports ------------------------------------------------------------------

PLAN_CSV_HEADER = "robot,step,t,x,y,theta,j1,j2,j3,j4,j5,j6,grasp_id,event"
TRACE_CSV_HEADER = ("robot,step,t,x,y,theta,j1,j2,j3,j4,j5,j6,"
                    "residual_pos,residual_rot")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def plan_to_csv(plan_doc: dict) -> str:
    """Flatten plan knots; meters and radians, one row per robot per step."""
    lines = [PLAN_CSV_HEADER]
    for rn in plan_doc.get("robots", []):
        robot = rn["robot"]
        for step, kn in enumerate(rn.get("knots", [])):
            cells = [str(robot), str(step), _fmt(kn["t"])]
            cells += [_fmt(v) for v in kn["platform"]]
            cells += [_fmt(v) for v in kn["arm"]]
            cells.append(kn["grasp"] if kn["grasp"] is not None else "")
            cells.append(kn["event"])
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def trace_to_csv(trace_doc: dict) -> str:
    lines = [TRACE_CSV_HEADER]
    ts = trace_doc.get("t", [])
    for rn in trace_doc.get("robots", []):
        robot = rn["robot"]
        for step, cfg in enumerate(rn.get("configs", [])):
            res_p = rn["residual_pos"][step]
            res_r = rn["residual_rot"][step]
            cells = [str(robot), str(step), _fmt(ts[step])]
            cells += [_fmt(v) for v in cfg["platform"]]
            cells += [_fmt(v) for v in cfg["arm"]]
            cells.append("" if res_p is None else _fmt(res_p))
            cells.append("" if res_r is None else _fmt(res_r))
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
