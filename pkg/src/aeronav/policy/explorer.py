"""Coverage-seeking exploration policy with dead-reckoned visit memory.

The rule-table explorer in :mod:`.scripted` is memoryless and tends to
oscillate between two headings in corners or shuttle along one axis of a
room. This policy keeps a small recurrent state instead:

* odometry integrated from its own actions (a Forward that leaves the
  observation unchanged was blocked, since the simulator is deterministic),
* visit counts on a coarse horizontal grid,
* a decide/travel phase: pick a heading whose free range is long and whose
  ray crosses little visited ground, then fly straight until close to an
  obstacle.

Only the feature bundle is observed; there is no access to the scene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..perception import FeatureBundle
from ..simulator.kinematics import STEP_M, TURN_RAD, Action
from .base import Policy, one_hot

FULL_TURN = int(round(2 * math.pi / TURN_RAD))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class ExploreMemory:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    last: Action | None = None
    signature: tuple | None = None
    visits: dict = field(default_factory=dict)
    travelling: bool = False
    travel_left: int = 0
    turn: Action = Action.TURN_LEFT
    turned: int = 0
    looked_around: bool = False
    best: tuple = (-math.inf, 0.0)   # (score, yaw) over the current decision
    widest: tuple = (-math.inf, 0.0)  # (front range, yaw) over the current decision
    cruise: float | None = None       # altitude target; None means the policy default


class CoverageExplore(Policy):
    """Decide a heading, fly it, repeat; prefers long and unvisited rays."""

    name = "coverage-explore"

    def __init__(self, cell: float = 0.45, cruise_altitude: float = 0.8, altitude_band: float = 0.1,
                 min_range: float = 1.2, clearance: float = 0.5, visit_penalty: float = 1.5,
                 go_score: float = 1.5, lookahead: float = 2.5, front_half_width: int = 3,
                 climb_step: float = 0.3, max_climb: float = 0.6):
        self.cell = cell
        self.cruise_altitude = cruise_altitude
        self.altitude_band = altitude_band
        self.min_range = min_range
        self.clearance = clearance
        self.visit_penalty = visit_penalty
        self.go_score = go_score
        self.lookahead = lookahead
        self.front_half_width = front_half_width
        self.climb_step = climb_step
        self.max_climb = max_climb

    def reset(self) -> ExploreMemory:
        return ExploreMemory()

    def _key(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell), math.floor(y / self.cell))

    def score(self, mem: ExploreMemory, heading: float, free_range: float) -> float:
        """Free range minus the mean (capped) visit count sampled along the ray."""
        if free_range < self.min_range:
            return -1.0
        reach = min(free_range - 0.3, self.lookahead)
        ds = np.arange(0.3, reach + 1e-9, 0.3)
        visits = sum(min(mem.visits.get(self._key(mem.x + d * math.cos(heading),
                                                  mem.y + d * math.sin(heading)), 0), 3) for d in ds)
        return min(free_range, 3.0) - self.visit_penalty * visits / max(len(ds), 1)

    @staticmethod
    def sector_headings(bundle: FeatureBundle) -> list[tuple[float, float]]:
        """(body azimuth, free range in metres) per scan sector, left to right."""
        n = bundle.scan.n
        half = math.pi / 4
        w = 2 * half / n
        return [(half - (i + 0.5) * w, float(bundle.scan.rho_min[i]) * bundle.max_range) for i in range(n)]

    def _odometry(self, bundle: FeatureBundle, mem: ExploreMemory) -> tuple[ExploreMemory, bool]:
        sig = (tuple(bundle.scan.rho_min.tolist()), bundle.roi.dx, bundle.roi.dy, bundle.roi.z_mean,
               bundle.altitude)
        x, y, yaw = mem.x, mem.y, mem.yaw
        blocked = False
        if mem.last == Action.FORWARD:
            if sig != mem.signature:
                x += STEP_M * math.cos(yaw)
                y += STEP_M * math.sin(yaw)
            else:
                blocked = True
        elif mem.last in (Action.ASCEND, Action.DESCEND) and sig == mem.signature:
            # something above or below: hold the altitude reached
            mem = replace(mem, cruise=bundle.altitude)
        elif mem.last == Action.TURN_LEFT:
            yaw += TURN_RAD
        elif mem.last == Action.TURN_RIGHT:
            yaw -= TURN_RAD
        visits = mem.visits
        if mem.last not in (Action.TURN_LEFT, Action.TURN_RIGHT):
            visits = dict(visits)
            k = self._key(x, y)
            visits[k] = visits.get(k, 0) + 1
        return replace(mem, x=x, y=y, yaw=yaw, signature=sig, visits=visits), blocked

    def act(self, bundle: FeatureBundle, memory: ExploreMemory | None = None):
        mem, blocked = self._odometry(bundle, memory or self.reset())
        action, mem = self._choose(bundle, mem, blocked)
        return one_hot(action), replace(mem, last=action)

    def _choose(self, bundle: FeatureBundle, mem: ExploreMemory, blocked: bool) -> tuple[Action, ExploreMemory]:
        cruise = self.cruise_altitude if mem.cruise is None else mem.cruise
        if bundle.altitude < cruise - self.altitude_band:
            return Action.ASCEND, mem
        if bundle.altitude > cruise + self.altitude_band:
            return Action.DESCEND, mem
        n = bundle.scan.n
        mid = n // 2
        front = float(bundle.scan.rho_min[mid - self.front_half_width: mid + self.front_half_width].min())
        front *= bundle.max_range
        clear = front > self.clearance and not blocked

        if mem.travelling:
            if clear and mem.travel_left > 0:
                return Action.FORWARD, replace(mem, travel_left=mem.travel_left - 1)
            mem = replace(mem, travelling=False, turned=0, best=(-math.inf, 0.0), widest=(-math.inf, 0.0))

        headings = self.sector_headings(bundle)
        here = max(self.score(mem, mem.yaw + phi, r) for phi, r in headings[mid - 2: mid + 2])
        best = max(mem.best, (here, mem.yaw)) if clear else mem.best
        widest = max(mem.widest, (front, mem.yaw))
        mem = replace(mem, best=best, widest=widest)

        go = clear and mem.looked_around and here >= self.go_score
        if not go and mem.turned == FULL_TURN and best[0] <= 0 and widest[0] < self.min_range \
                and cruise < self.cruise_altitude + self.max_climb:
            # cramped all around at this height; low clutter is often passable from above
            return Action.ASCEND, replace(mem, cruise=cruise + self.climb_step, turned=0,
                                          best=(-math.inf, 0.0), widest=(-math.inf, 0.0))
        target = None
        if not go and mem.turned >= FULL_TURN:
            target = best[1] if best[0] > 0 else widest[1]
            go = clear and (abs(_wrap(mem.yaw - target)) < TURN_RAD / 2 or mem.turned >= 2 * FULL_TURN)
        if go:
            steps = max(0, int((min(front, 3.0) - 0.45) / STEP_M)) - 1
            return Action.FORWARD, replace(mem, travelling=True, travel_left=steps, looked_around=True, turned=0)

        turn = mem.turn
        if target is not None and mem.turned < 2 * FULL_TURN:
            turn = Action.TURN_LEFT if _wrap(target - mem.yaw) >= 0 else Action.TURN_RIGHT
        elif mem.turned == 0:
            # rotate toward the side holding the most promising sector
            _, phi = max((self.score(mem, mem.yaw + phi, r), phi) for phi, r in headings)
            turn = Action.TURN_LEFT if phi >= 0 else Action.TURN_RIGHT
        return turn, replace(mem, turn=turn, turned=mem.turned + 1)
