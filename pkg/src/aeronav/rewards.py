"""Goal-reaching and exploration reward engines plus the task success predicate."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .simulator.kinematics import Action
from .simulator.queries import SUCCESS_DISTANCE
from .simulator.sensors import Detection

FIELDS = ("r_d", "r_parent", "r_bbox", "r_suc", "r_c", "r_fwd", "r_dir", "r_safe", "gamma")
GOAL_TERMS = ("r_d", "r_parent", "r_bbox", "r_suc", "r_c", "gamma")
EXPLORE_TERMS = ("r_fwd", "r_dir", "r_safe", "gamma")

CENTRAL_FRACTION = 0.8
# boundary tolerance in pixels; centres exactly on the window edge count as inside
WINDOW_EPS = 1e-9


@dataclass(frozen=True)
class GoalRewardConfig:
    r_success: float = 5.0
    r_collision: float = -0.1
    step_penalty: float = -0.02
    r_parent: float = 1.0
    bbox_cap: float = 0.1
    ablate: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.bbox_cap <= 0:
            raise ValueError("bbox_cap must be positive")
        if self.step_penalty >= 0:
            raise ValueError("step_penalty must be negative")
        object.__setattr__(self, "ablate", frozenset(self.ablate))
        unknown = self.ablate - set(GOAL_TERMS)
        if unknown:
            raise ValueError(f"unknown goal reward terms {sorted(unknown)}")


@dataclass(frozen=True)
class ExploreRewardConfig:
    forward_clamp: float = 0.2
    dir_coeff: float = 0.75
    dy_gain: float = 2.0
    d_thr: float = 0.3
    rho_thr: float = 1.0 / 3.0
    safe_gain: float = 2.0
    step_penalty: float = -0.01
    # True rewards a growing ROI depth (z_cur - z_prev) instead of approach
    literal_forward_sign: bool = False
    ablate: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0 < self.d_thr < math.sqrt(5.0):
            raise ValueError("d_thr must lie in (0, sqrt(5))")
        if not 0 < self.rho_thr < 1:
            raise ValueError("rho_thr must lie in (0, 1)")
        object.__setattr__(self, "ablate", frozenset(self.ablate))
        unknown = self.ablate - set(EXPLORE_TERMS)
        if unknown:
            raise ValueError(f"unknown explore reward terms {sorted(unknown)}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_d: float = 0.0
    r_parent: float = 0.0
    r_bbox: float = 0.0
    r_suc: float = 0.0
    r_c: float = 0.0
    r_fwd: float = 0.0
    r_dir: float = 0.0
    r_safe: float = 0.0
    gamma: float = 0.0
    total: float = 0.0

    @classmethod
    def of(cls, **terms) -> "RewardBreakdown":
        total = 0.0
        for name in FIELDS:
            total += terms.get(name, 0.0)
        return cls(**terms, total=total)

    def to_dict(self) -> dict:
        return asdict(self)


def _keep(value: float, name: str, ablate) -> float:
    return 0.0 if name in ablate else value


def goal_reward(prev_dist: float, cur_dist: float, parent_first_seen: bool, area_ratio: float,
                success: bool, collided: bool, cfg: GoalRewardConfig = GoalRewardConfig()) -> RewardBreakdown:
    """Per-step goal-reaching reward.

    The approach term is the signed decrease in distance to the closest target;
    non-finite distances (no target in the scene) contribute nothing.
    """
    r_d = prev_dist - cur_dist if math.isfinite(prev_dist) and math.isfinite(cur_dist) else 0.0
    ab = cfg.ablate
    return RewardBreakdown.of(
        r_d=_keep(r_d, "r_d", ab),
        r_parent=_keep(cfg.r_parent if parent_first_seen else 0.0, "r_parent", ab),
        r_bbox=_keep(min(area_ratio, cfg.bbox_cap), "r_bbox", ab),
        r_suc=_keep(cfg.r_success if success else 0.0, "r_suc", ab),
        r_c=_keep(cfg.r_collision if collided else 0.0, "r_c", ab),
        gamma=_keep(cfg.step_penalty, "gamma", ab),
    )


def forward_term(z_prev: float, z_cur: float, cfg: ExploreRewardConfig) -> float:
    delta = (z_cur - z_prev) if cfg.literal_forward_sign else (z_prev - z_cur)
    return min(max(delta, -cfg.forward_clamp), cfg.forward_clamp)


def direction_term(dx: float, dy: float, cfg: ExploreRewardConfig) -> float:
    d = math.sqrt(dx * dx + (cfg.dy_gain * dy) ** 2)
    return -cfg.dir_coeff * d if d > cfg.d_thr else 0.0


def safety_term(rho_min: float, cfg: ExploreRewardConfig) -> float:
    if rho_min <= cfg.rho_thr:
        return 1.0 - math.exp(cfg.safe_gain * (cfg.rho_thr - rho_min))
    return 0.0


def explore_reward(z_mean_prev: float, z_mean_cur: float, dx: float, dy: float, rho_min: float,
                   cfg: ExploreRewardConfig = ExploreRewardConfig()) -> RewardBreakdown:
    ab = cfg.ablate
    return RewardBreakdown.of(
        r_fwd=_keep(forward_term(z_mean_prev, z_mean_cur, cfg), "r_fwd", ab),
        r_dir=_keep(direction_term(dx, dy, cfg), "r_dir", ab),
        r_safe=_keep(safety_term(rho_min, cfg), "r_safe", ab),
        gamma=_keep(cfg.step_penalty, "gamma", ab),
    )


def in_central_window(detection: Detection, image_dims: tuple[int, int],
                      fraction: float = CENTRAL_FRACTION) -> bool:
    width, height = image_dims
    cu, cv = detection.center
    return (abs(cu - width / 2.0) <= fraction * width / 2.0 + WINDOW_EPS
            and abs(cv - height / 2.0) <= fraction * height / 2.0 + WINDOW_EPS)


def success_check(detection: Detection, image_dims: tuple[int, int], distance: float, action) -> bool:
    """Detected and centred, strictly closer than 1.5 m, and the agent chose Done."""
    return (Action(action) == Action.DONE and detection.present
            and in_central_window(detection, image_dims) and distance < SUCCESS_DISTANCE)
