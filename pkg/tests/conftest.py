import numpy as np
import pytest

from comanip.geom import Pose, rotation_about_axis
from comanip.model import ArmModel, Config, PlatformModel, RevoluteJoint, RobotModel


def _offset(x, y, z):
    return Pose(np.eye(3), np.array([x, y, z]))


def make_test_arm() -> ArmModel:
    """6R chain with orthogonal alternating axes and 0.3 m main links."""
    joints = (
        RevoluteJoint(_offset(0.0, 0.0, 0.10), np.array([0.0, 0.0, 1.0])),
        RevoluteJoint(_offset(0.0, 0.0, 0.10), np.array([0.0, 1.0, 0.0])),
        RevoluteJoint(_offset(0.0, 0.0, 0.30), np.array([0.0, 1.0, 0.0])),
        RevoluteJoint(_offset(0.0, 0.0, 0.30), np.array([0.0, 0.0, 1.0])),
        RevoluteJoint(_offset(0.0, 0.0, 0.10), np.array([0.0, 1.0, 0.0])),
        RevoluteJoint(_offset(0.0, 0.0, 0.10), np.array([0.0, 0.0, 1.0])),
    )
    limits = np.array([[-2.967, 2.967]] * 6)
    tool = _offset(0.0, 0.0, 0.12)
    return ArmModel(joints, limits, tool)


def make_test_robot(name="r0", workspace=3.0) -> RobotModel:
    platform = PlatformModel(
        mount=_offset(0.0, 0.0, 0.35),
        bounds_x=(-workspace, workspace),
        bounds_y=(-workspace, workspace),
        bounds_theta=(-2.0 * np.pi, 2.0 * np.pi),
    )
    return RobotModel(name, platform, make_test_arm())


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return rotation_about_axis(axis, rng.uniform(-np.pi, np.pi))


def random_pose(rng: np.random.Generator, span=1.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-span, span, 3))


@pytest.fixture
def test_arm():
    return make_test_arm()


@pytest.fixture
def test_robot():
    return make_test_robot()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
