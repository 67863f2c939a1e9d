"""Re-simulate a logged action sequence and compare it with the log."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError
from ..simulator.kinematics import Action
from ..simulator.scene import VoxelScene
from .env import NavEnv
from .runner import EpisodeConfig, EpisodeRecord

TOLERANCE = 1e-9
_NUMERIC = ("x", "y", "z", "yaw", "rho_min")
_EXACT = ("action", "policy", "collided", "detected")


@dataclass(frozen=True)
class ReplayVerdict:
    ok: bool
    steps_checked: int
    mismatch_step: int | None = None
    field: str | None = None
    logged: object = None
    replayed: object = None

    def describe(self) -> str:
        if self.ok:
            return f"OK: {self.steps_checked} steps reproduced"
        return (f"MISMATCH at step {self.mismatch_step}: field {self.field!r} "
                f"logged {self.logged!r}, replayed {self.replayed!r}")


def _close(a: float, b: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= TOLERANCE


def replay(record: EpisodeRecord, scene: VoxelScene) -> ReplayVerdict:
    """Drive a fresh environment with the logged actions and check every field."""
    cfg = EpisodeConfig.from_dict(record.config, scene)
    if cfg.config_hash() != record.config_hash:
        raise ConfigError("log header config does not hash to the logged config_hash")
    env = NavEnv(cfg.scene, cfg.target_class, cfg.start_pose(), k=cfg.intrinsics, noise=cfg.noise,
                 seed=cfg.seed, perception=cfg.perception, goal_cfg=cfg.goal_cfg,
                 explore_cfg=cfg.explore_cfg, track_coverage=False)
    env.reset()
    for i, logged in enumerate(record.steps):
        if logged.step != i:
            return ReplayVerdict(False, i, i, "step", logged.step, i)
        action = Action.parse(logged.action)
        engine = cfg.reward_engine if cfg.reward_engine != "auto" else logged.policy
        tr = env.step(action, engine)
        p = env.pose
        got = {"x": p.position[0], "y": p.position[1], "z": p.position[2], "yaw": p.yaw,
               "rho_min": float(tr.obs.bundle.scan.closest), "action": action.label,
               "policy": logged.policy, "collided": tr.collided, "detected": bool(tr.obs.detection.present)}
        for name in _EXACT:
            if getattr(logged, name) != got[name]:
                return ReplayVerdict(False, i + 1, i, name, getattr(logged, name), got[name])
        for name in _NUMERIC:
            if not _close(float(getattr(logged, name)), float(got[name])):
                return ReplayVerdict(False, i + 1, i, name, getattr(logged, name), got[name])
        want, have = logged.reward.to_dict(), tr.reward.to_dict()
        for name in sorted(want):
            if not _close(float(want[name]), float(have[name])):
                return ReplayVerdict(False, i + 1, i, f"reward.{name}", want[name], have[name])
        if tr.done and i != len(record.steps) - 1:
            return ReplayVerdict(False, i + 1, i + 1, "terminal", "continues", "episode ended")
    return ReplayVerdict(True, len(record.steps))
