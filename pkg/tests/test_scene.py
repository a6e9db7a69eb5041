import math

import numpy as np
import pytest

from comanip.geom import Pose, pose_from_xyz_rpy
from comanip.model import Config
from comanip.scene import (
    Capsule,
    ObjectModel,
    RobotGeometry,
    Scene,
    SceneRobot,
    capsule_distance,
    in_cfree,
    posed_capsule,
    robot_world_capsules,
    validity_violations,
)
from conftest import make_test_robot


def sampled_capsule_distance(a: Capsule, b: Capsule, step=1e-4) -> float:
    """Brute-force oracle: sample one segment, exact point-segment distance."""
    n = max(2, int(np.ceil(1.0 / step)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = a.p0[None, :] + ts[:, None] * (a.p1 - a.p0)[None, :]
    d = b.p1 - b.p0
    dd = float(np.dot(d, d))
    if dd < 1e-18:
        dists = np.linalg.norm(pts - b.p0, axis=1)
    else:
        s = np.clip(((pts - b.p0) @ d) / dd, 0.0, 1.0)
        closest = b.p0[None, :] + s[:, None] * d[None, :]
        dists = np.linalg.norm(pts - closest, axis=1)
    return float(dists.min()) - a.radius - b.radius


def default_geometry() -> RobotGeometry:
    return RobotGeometry(
        platform=(Capsule([-0.15, 0.0, 0.16], [0.15, 0.0, 0.16], 0.13),),
        links=(
            (),
            (Capsule([0.0, 0.0, 0.02], [0.0, 0.0, 0.26], 0.05),),
            (Capsule([0.0, 0.0, 0.03], [0.0, 0.0, 0.27], 0.045),),
            (),
            (),
            (),
        ),
        tool=(Capsule([0.0, 0.0, -0.10], [0.0, 0.0, -0.02], 0.04),),
    )


def simple_scene(n_robots=1, obstacles=(), floor=0.0) -> Scene:
    robots = []
    for i in range(n_robots):
        x, theta = (-0.8, 0.0) if i % 2 == 0 else (0.8, math.pi)
        robots.append(
            SceneRobot(
                model=make_test_robot(f"r{i}"),
                initial=Config(np.array([x, 0.6 * (i // 2), theta]), np.zeros(6)),
                geometry=default_geometry(),
            )
        )
    obj = ObjectModel(
        half_extents=[0.3, 0.3, 0.05],
        capsules=(Capsule([-0.25, 0.0, 0.0], [0.25, 0.0, 0.0], 0.05),),
    )
    return Scene(tuple(robots), obj, obstacles=tuple(obstacles), floor_z=floor)


STRAIGHT_OUT = np.array([0.0, math.pi / 2, -math.pi / 2, 0.0, 0.4, 0.0])


class TestCapsuleDistance:
    def test_parallel_unit_apart(self):
        a = Capsule([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.1)
        b = Capsule([0.0, 1.0, 0.0], [1.0, 1.0, 0.0], 0.1)
        assert capsule_distance(a, b) == pytest.approx(0.8, abs=1e-12)

    def test_coincident(self):
        a = Capsule([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.07)
        assert capsule_distance(a, a) == pytest.approx(-0.14, abs=1e-12)

    def test_degenerate_points(self):
        a = Capsule([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.1)
        b = Capsule([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.2)
        assert capsule_distance(a, b) == pytest.approx(0.7, abs=1e-12)

    def test_random_against_sampled_oracle(self, rng):
        for _ in range(25):
            a = Capsule(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3), rng.uniform(0.02, 0.2))
            b = Capsule(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3), rng.uniform(0.02, 0.2))
            got = capsule_distance(a, b)
            oracle = sampled_capsule_distance(a, b)
            assert got <= oracle + 1e-12  # oracle only samples, never undershoots
            assert abs(got - oracle) <= 1e-3

    def test_posed_capsule(self, rng):
        c = Capsule([0.1, 0.2, 0.3], [0.4, 0.5, 0.6], 0.05)
        pose = pose_from_xyz_rpy([1, 2, 3], [30, 20, 10])
        moved = posed_capsule(c, pose)
        assert np.allclose(moved.p0, pose.apply(c.p0))
        assert np.allclose(moved.p1, pose.apply(c.p1))
        assert moved.radius == c.radius


class TestInCfree:
    def test_robot_alone_straight_out(self):
        scene = simple_scene(1)
        q = Config(np.array([0.0, 0.0, 0.0]), STRAIGHT_OUT)
        assert in_cfree(scene, 0, q, None)

    def test_identical_platforms_collide(self):
        scene = simple_scene(2)
        q = Config(np.array([0.0, 0.0, 0.0]), STRAIGHT_OUT)
        assert not in_cfree(scene, 0, q, None, others=[(1, q)])
        assert "robot:1" in validity_violations(scene, 0, q, None, others=[(1, q)])

    def test_limits_violation(self):
        scene = simple_scene(1)
        q = Config(np.array([0.0, 0.0, 0.0]), np.full(6, 3.5))
        assert validity_violations(scene, 0, q, None) == ["limits"]

    def test_object_collision_and_grasp_exemption(self):
        scene = simple_scene(1)
        q = Config(np.array([0.0, 0.0, 0.0]), STRAIGHT_OUT)
        from comanip.model import fk

        ee = fk(scene.robots[0].model, q)
        # park the object right at the gripper: collides without exemption
        assert not in_cfree(scene, 0, q, ee)
        assert in_cfree(scene, 0, q, ee, exempt_anchors=(ee,))

    def test_floor_catches_low_arm(self):
        scene = simple_scene(1)
        # shoulder pitched far over: the upper arm dives below the floor
        q = Config(np.array([0.0, 0.0, 0.0]), np.array([0.0, 2.6, 0.0, 0.0, 0.0, 0.0]))
        assert "floor" in validity_violations(scene, 0, q, None)

    def test_obstacle(self):
        wall = Capsule([0.3, -1.0, 0.7], [0.3, 1.0, 0.7], 0.1)
        scene = simple_scene(1, obstacles=[wall])
        q = Config(np.array([0.0, 0.0, 0.0]), STRAIGHT_OUT)
        assert "obstacle" in validity_violations(scene, 0, q, None)

    def test_symmetry_of_robot_robot_verdict(self, rng):
        scene = simple_scene(2)
        for _ in range(30):
            qa = Config(
                np.append(rng.uniform(-1.0, 1.0, 2), rng.uniform(-3, 3)),
                scene.robots[0].model.arm.random_config(rng),
            )
            qb = Config(
                np.append(rng.uniform(-1.0, 1.0, 2), rng.uniform(-3, 3)),
                scene.robots[1].model.arm.random_config(rng),
            )
            va = f"robot:1" in validity_violations(scene, 0, qa, None, others=[(1, qb)])
            vb = f"robot:0" in validity_violations(scene, 1, qb, None, others=[(0, qa)])
            assert va == vb

    def test_shrinking_radii_monotone(self, rng):
        # shrinking every radius by delta never turns a valid verdict invalid
        def scene_with_scale(delta):
            geo = default_geometry()
            def shrink(caps):
                return tuple(
                    Capsule(c.p0, c.p1, max(c.radius - delta, 1e-6)) for c in caps
                )
            geometry = RobotGeometry(
                platform=shrink(geo.platform),
                links=tuple(shrink(l) for l in geo.links),
                tool=shrink(geo.tool),
            )
            robots = tuple(
                SceneRobot(make_test_robot(f"r{i}"),
                           Config(np.array([-1.0 + 2.0 * i, 0.0, 0.0]), np.zeros(6)),
                           geometry)
                for i in range(2)
            )
            obj = ObjectModel([0.3, 0.3, 0.05],
                              (Capsule([-0.25, 0, 0], [0.25, 0, 0], max(0.05 - delta, 1e-6)),))
            return Scene(robots, obj, floor_z=0.0)

        base = scene_with_scale(0.0)
        shrunk = scene_with_scale(0.01)
        obj_pose = Pose(np.eye(3), np.array([0.0, 0.8, 0.6]))
        for _ in range(30):
            q0 = Config(
                np.append(rng.uniform(-1.2, 1.2, 2), rng.uniform(-3, 3)),
                base.robots[0].model.arm.random_config(rng),
            )
            q1 = Config(np.array([1.0, 0.0, 0.0]), STRAIGHT_OUT)
            if in_cfree(base, 0, q0, obj_pose, others=[(1, q1)]):
                assert in_cfree(shrunk, 0, q0, obj_pose, others=[(1, q1)])

    def test_random_verdicts_against_sampled_oracle(self, rng):
        scene = simple_scene(1)
        obj_pose = Pose(np.eye(3), np.array([0.6, 0.0, 0.7]))
        checked = 0
        for _ in range(40):
            q = Config(
                np.append(rng.uniform(-0.5, 0.5, 2), rng.uniform(-3, 3)),
                scene.robots[0].model.arm.random_config(rng),
            )
            segs, radii, _ = robot_world_capsules(scene.robots[0], q)
            caps = [Capsule(segs[i, :3], segs[i, 3:], radii[i]) for i in range(len(radii))]
            from comanip.scene import object_world_capsules

            osegs, oradii = object_world_capsules(scene, obj_pose)
            ocaps = [Capsule(osegs[i, :3], osegs[i, 3:], oradii[i]) for i in range(len(oradii))]
            # oracle verdict for the robot-object clause, 5 mm sampling
            min_clear = min(
                sampled_capsule_distance(a, b, step=5e-3 / max(np.linalg.norm(a.p1 - a.p0), 1e-9))
                for a in caps
                for b in ocaps
            )
            verdict = "object" in validity_violations(scene, 0, q, obj_pose)
            if abs(min_clear - scene.margin) < 2e-3:
                continue  # too close to the margin for a sampled oracle to decide
            assert verdict == (min_clear < scene.margin)
            checked += 1
        assert checked >= 25
