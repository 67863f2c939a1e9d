"""Discrete 3-D action space and collision-checked agent motion."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ContractError
from ..geometry import Pose
from .raycast import sphere_hits
from .scene import VoxelScene

STEP_M = 0.15
TURN_RAD = math.radians(30.0)
CLEARANCE = 0.12
SWEEP_SAMPLES = 4


class Action(enum.IntEnum):
    ASCEND = 0
    DESCEND = 1
    FORWARD = 2
    TURN_LEFT = 3
    TURN_RIGHT = 4
    DONE = 5

    @classmethod
    def parse(cls, name: str) -> "Action":
        key = name.strip().upper().replace("-", "_")
        aliases = {"TURNLEFT": "TURN_LEFT", "TURNRIGHT": "TURN_RIGHT"}
        return cls[aliases.get(key, key)]

    @property
    def label(self) -> str:
        return {0: "Ascend", 1: "Descend", 2: "Forward", 3: "TurnLeft", 4: "TurnRight", 5: "Done"}[self.value]


N_ACTIONS = len(Action)
MOTION_ACTIONS = (Action.ASCEND, Action.DESCEND, Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


@dataclass(frozen=True)
class AgentState:
    pose: Pose
    collided_last_step: bool = False
    steps_taken: int = 0


def collides(scene: VoxelScene, position, clearance: float = CLEARANCE) -> bool:
    return bool(sphere_hits(scene.occupancy, scene.resolution, np.asarray(position, dtype=float), clearance))


def is_valid_position(scene: VoxelScene, position, clearance: float = CLEARANCE) -> bool:
    z = position[2]
    if z < scene.floor_z + clearance or z > scene.ceiling_z - clearance:
        return False
    return not collides(scene, position, clearance)


def _target_position(pose: Pose, action: Action) -> np.ndarray:
    p = pose.as_array()
    if action == Action.FORWARD:
        p = p + STEP_M * np.array([math.cos(pose.yaw), math.sin(pose.yaw), 0.0])
    elif action == Action.ASCEND:
        p = p + np.array([0.0, 0.0, STEP_M])
    elif action == Action.DESCEND:
        p = p - np.array([0.0, 0.0, STEP_M])
    return p


def step(scene: VoxelScene, state: AgentState, action: Action,
         clearance: float = CLEARANCE) -> tuple[AgentState, bool, bool]:
    """Apply one action. Returns (new_state, collided, done_signaled)."""
    action = Action(action)
    pose = state.pose
    if action == Action.DONE:
        return replace(state, collided_last_step=False, steps_taken=state.steps_taken + 1), False, True
    if action in (Action.TURN_LEFT, Action.TURN_RIGHT):
        dyaw = TURN_RAD if action == Action.TURN_LEFT else -TURN_RAD
        new_pose = Pose(pose.position, pose.yaw + dyaw)
        return AgentState(new_pose, False, state.steps_taken + 1), False, False

    start = pose.as_array()
    end = _target_position(pose, action)
    blocked = False
    for s in range(1, SWEEP_SAMPLES + 1):
        p = start + (end - start) * (s / SWEEP_SAMPLES)
        if collides(scene, p, clearance):
            blocked = True
            break
    if blocked:
        return AgentState(pose, True, state.steps_taken + 1), True, False
    return AgentState(Pose(tuple(end), pose.yaw), False, state.steps_taken + 1), False, False


def check_state(scene: VoxelScene, state: AgentState, clearance: float = CLEARANCE) -> None:
    if not is_valid_position(scene, state.pose.position, clearance):
        raise ContractError(f"agent pose {state.pose.position} intersects the scene")
