"""Exploration/goal-reaching switching controller."""

from __future__ import annotations

import enum

from .base import Policy

DEFAULT_REVERT_K = 5


class Mode(str, enum.Enum):
    EXPLORE = "explore"
    GOAL = "goal"


class DualController:
    """Runs the exploration policy until the target is detected, then the goal policy.

    After ``revert_threshold`` consecutive frames without a detection the
    controller falls back to exploration.
    """

    def __init__(self, explore_policy: Policy | None, goal_policy: Policy | None,
                 revert_threshold: int = DEFAULT_REVERT_K):
        if revert_threshold < 1:
            raise ValueError("revert_threshold must be >= 1")
        self.explore_policy = explore_policy
        self.goal_policy = goal_policy
        self.revert_threshold = revert_threshold
        self.reset()

    def reset(self) -> None:
        self.active = Mode.EXPLORE
        self.lost_frames = 0
        self.ever_detected = False

    def switch(self, detection_present: bool) -> Mode:
        if detection_present:
            self.active = Mode.GOAL
            self.lost_frames = 0
            self.ever_detected = True
        elif self.active == Mode.GOAL:
            self.lost_frames += 1
            if self.lost_frames >= self.revert_threshold:
                self.active = Mode.EXPLORE
                self.lost_frames = 0
        return self.active

    def policy_for(self, mode: Mode) -> Policy:
        return self.goal_policy if mode == Mode.GOAL else self.explore_policy


class SingleController:
    """Always runs one policy; reports it under a fixed mode."""

    def __init__(self, policy: Policy, mode: Mode):
        self.policy = policy
        self.mode = mode
        self.active = mode

    def reset(self) -> None:
        self.active = self.mode

    def switch(self, detection_present: bool) -> Mode:
        return self.mode

    def policy_for(self, mode: Mode) -> Policy:
        return self.policy
