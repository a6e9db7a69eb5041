"""Planning toolkit for teams of mobile manipulators co-grasping one object.

Given an object trajectory in SE(3) and a set of candidate grasp poses,
the planner decides whether the manipulation can be completed without
regrasping, otherwise plans with the minimum number of regrasps, and emits
per-robot configuration trajectories plus a leader-follower execution
simulation.
"""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
