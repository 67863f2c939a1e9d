"""Rule-based exploration / goal-reaching policies and a random baseline."""

from __future__ import annotations

import math

import numpy as np

from ..perception import FeatureBundle
from ..simulator.kinematics import MOTION_ACTIONS, N_ACTIONS, Action
from .base import Policy, RulePolicy, one_hot

CENTRAL_LO, CENTRAL_HI = 0.1, 0.9


class ScriptedExplore(RulePolicy):
    """Steer toward the depth ROI while turning away from close obstacles.

    Rule priority: obstacle avoidance, vertical correction when the (doubled)
    vertical offset dominates, horizontal correction, then Forward.
    """

    name = "scripted-explore"

    def __init__(self, rho_thr: float = 0.15, d_thr: float = 0.3, dy_gain: float = 2.0):
        self.rho_thr = rho_thr
        self.d_thr = d_thr
        self.dy_gain = dy_gain

    def choose(self, bundle: FeatureBundle) -> Action:
        rho = bundle.scan.rho_min
        k = int(np.argmin(rho))
        if rho[k] <= self.rho_thr:
            # sectors run left -> right
            return Action.TURN_LEFT if k >= len(rho) / 2.0 else Action.TURN_RIGHT
        roi = bundle.roi
        if not roi.valid:
            return Action.TURN_LEFT
        vert = self.dy_gain * roi.dy
        d = math.sqrt(roi.dx ** 2 + vert ** 2)
        if d > self.d_thr:
            if abs(vert) >= abs(roi.dx):
                return Action.ASCEND if roi.dy < 0 else Action.DESCEND
            return Action.TURN_RIGHT if roi.dx > 0 else Action.TURN_LEFT
        return Action.FORWARD

    def act(self, bundle, memory=None):
        """Rule table plus turn hysteresis.

        The memory is the direction of the turn in progress. Reversing a turn
        mid-rotation makes the agent flip-flop in corners, so a contrary turn
        is replaced by the committed one until a non-turn action comes up.
        """
        a = self.choose(bundle)
        if a in (Action.TURN_LEFT, Action.TURN_RIGHT):
            if memory is not None:
                a = Action(memory)
            return one_hot(a), int(a)
        return one_hot(a), None


class ScriptedGoal(RulePolicy):
    """Visual servoing on the detected bounding box.

    Without a detection the policy either scans locally (climb to
    ``scan_altitude`` and rotate in place) or hands over to a fallback
    policy when one is given. A 30 degree turn moves the box centre by
    roughly 0.29 of the image width, so ``center_tol`` must stay above half
    of that or centring can oscillate.

    The recurrent memory is the previous (action, observation signature).
    A motion that left the observation unchanged was blocked, and repeating
    it would only collide again; the next rule in line is used instead.
    """

    name = "scripted-goal"

    def __init__(self, done_ratio: float = 0.08, center_tol: float = 0.2, vertical_tol: float = 0.12,
                 done_range: float = 1.0, scan_altitude: float = 1.2, fallback: RulePolicy | None = None):
        self.done_ratio = done_ratio
        self.center_tol = center_tol
        self.vertical_tol = vertical_tol
        self.done_range = done_range
        self.scan_altitude = scan_altitude
        self.fallback = fallback

    def _range_at(self, bundle: FeatureBundle, cx: float) -> float:
        """Slice range (metres) in the sector under the box centre."""
        rho = bundle.scan.rho_min
        n = len(rho)
        sector = min(max(int(cx * n), 0), n - 1)
        return float(rho[sector]) * bundle.max_range

    def choose(self, bundle: FeatureBundle, blocked: Action | None = None) -> Action:
        bb = bundle.bbox
        if not bb.present:
            if self.fallback is not None:
                return self.fallback.choose(bundle)
            if (bundle.altitude < self.scan_altitude and blocked != Action.ASCEND
                    and bundle.scan.closest * bundle.max_range > 0.3):
                return Action.ASCEND
            return Action.TURN_RIGHT
        centred = CENTRAL_LO <= bb.cx <= CENTRAL_HI and CENTRAL_LO <= bb.cy <= CENTRAL_HI
        level = abs(bb.cy - 0.5) <= self.vertical_tol
        if centred and (bb.area_ratio >= self.done_ratio or
                        (level and self._range_at(bundle, bb.cx) < self.done_range)):
            return Action.DONE
        if abs(bb.cx - 0.5) > self.center_tol:
            return Action.TURN_RIGHT if bb.cx > 0.5 else Action.TURN_LEFT
        vertical = Action.ASCEND if bb.cy < 0.5 else Action.DESCEND
        if not level and vertical != blocked:
            return vertical
        if blocked == Action.FORWARD:
            # something below the scan band is in the way; go over or under it
            if vertical != blocked and bundle.altitude < self.scan_altitude + 0.3:
                return Action.ASCEND
            return Action.DESCEND
        return Action.FORWARD

    def reset(self):
        return (None, None)

    def act(self, bundle, memory=None):
        last, sig = memory if memory is not None else (None, None)
        now = _signature(bundle)
        blocked = last if last in (Action.ASCEND, Action.DESCEND, Action.FORWARD) and sig == now else None
        a = self.choose(bundle, blocked)
        return one_hot(a), (a, now)


def _signature(bundle: FeatureBundle) -> tuple:
    return (bundle.altitude, bundle.roi.dx, bundle.roi.dy, bundle.roi.z_mean, tuple(bundle.scan.rho_min.tolist()))


class RandomPolicy(Policy):
    """Uniform over the five motion actions (Done would end the episode)."""

    name = "random"
    stochastic = True

    def act(self, bundle, memory=None):
        p = np.zeros(N_ACTIONS)
        p[[int(a) for a in MOTION_ACTIONS]] = 1.0 / len(MOTION_ACTIONS)
        return p, memory
