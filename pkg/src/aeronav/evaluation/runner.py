"""Episode orchestration: render -> perceive -> switch -> act -> step -> reward -> log."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from ..geometry import DEFAULT_INTRINSICS, CameraIntrinsics, Pose
from ..policy.actor_critic import ActorCriticPolicy, load_checkpoint
from ..policy.base import greedy, sample
from ..policy.controller import DEFAULT_REVERT_K, DualController, Mode, SingleController
from ..policy.explorer import CoverageExplore
from ..policy.scripted import RandomPolicy, ScriptedExplore, ScriptedGoal
from ..rewards import ExploreRewardConfig, GoalRewardConfig, RewardBreakdown
from ..simulator.queries import shortest_success_path
from ..simulator.scene import VoxelScene
from ..simulator.sensors import DetectorNoise
from .env import NavEnv, PerceptionConfig

POLICY_SPECS = ("scripted-dual", "random", "explore-only", "goal-only", "explore-rules", "trained:<checkpoint>")
LOG_FORMAT = "aeronav-trajectory"
LOG_VERSION = 1


def canonical_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


@dataclass
class EpisodeConfig:
    scene: VoxelScene
    target_class: str
    start: Pose | None = None
    max_steps: int = 200
    noise: DetectorNoise = field(default_factory=DetectorNoise)
    policy: str = "scripted-dual"
    seed: int = 0
    reward_engine: str = "auto"
    revert_k: int = DEFAULT_REVERT_K
    scene_ref: str = ""
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    goal_cfg: GoalRewardConfig = field(default_factory=GoalRewardConfig)
    explore_cfg: ExploreRewardConfig = field(default_factory=ExploreRewardConfig)
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    track_coverage: bool = True
    compute_spl: bool = True
    greedy: bool = True

    def start_pose(self) -> Pose:
        return self.start or Pose(self.scene.start, self.scene.start_yaw)

    def to_dict(self) -> dict:
        p = self.start_pose()
        k = self.intrinsics
        return {
            "scene_ref": self.scene_ref,
            "scene_digest": self.scene.digest(),
            "target_class": self.target_class,
            "start": [*p.position, p.yaw],
            "max_steps": self.max_steps,
            "noise": {"miss_prob": self.noise.miss_prob, "jitter_px": self.noise.jitter_px},
            "policy": self.policy,
            "seed": self.seed,
            "reward_engine": self.reward_engine,
            "revert_k": self.revert_k,
            "perception": self.perception.to_dict(),
            "goal_reward": {**asdict(self.goal_cfg), "ablate": sorted(self.goal_cfg.ablate)},
            "explore_reward": {**asdict(self.explore_cfg), "ablate": sorted(self.explore_cfg.ablate)},
            "intrinsics": {"fx": k.fx, "fy": k.fy, "cu": k.cu, "cv": k.cv, "width": k.width,
                           "height": k.height, "max_range": k.max_range},
            "greedy": self.greedy,
        }

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, scene: VoxelScene) -> "EpisodeConfig":
        """Inverse of :meth:`to_dict`; the scene is supplied separately and must match the digest."""
        if d.get("scene_digest") not in (None, scene.digest()):
            raise ConfigError(f"scene digest {scene.digest()} does not match logged {d['scene_digest']}")
        x, y, z, yaw = d["start"]
        k = d["intrinsics"]
        pc = dict(d["perception"])
        pc["patch_grid"] = tuple(pc["patch_grid"])
        return cls(
            scene=scene, target_class=d["target_class"], start=Pose((x, y, z), yaw),
            max_steps=int(d["max_steps"]), noise=DetectorNoise(**d["noise"]), policy=d["policy"],
            seed=int(d["seed"]), reward_engine=d["reward_engine"], revert_k=int(d["revert_k"]),
            scene_ref=d.get("scene_ref", ""), perception=PerceptionConfig(**pc),
            goal_cfg=GoalRewardConfig(**{**d["goal_reward"], "ablate": frozenset(d["goal_reward"]["ablate"])}),
            explore_cfg=ExploreRewardConfig(**{**d["explore_reward"],
                                               "ablate": frozenset(d["explore_reward"]["ablate"])}),
            intrinsics=CameraIntrinsics(fx=k["fx"], fy=k["fy"], cu=k["cu"], cv=k["cv"], width=k["width"],
                                        height=k["height"], max_range=k["max_range"]),
            greedy=bool(d.get("greedy", True)))


@dataclass
class StepLog:
    step: int
    x: float
    y: float
    z: float
    yaw: float
    action: str
    policy: str
    collided: bool
    detected: bool
    rho_min: float
    reward: RewardBreakdown

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("step", "x", "y", "z", "yaw", "action", "policy",
                                            "collided", "detected", "rho_min")}
        d.update(self.reward.to_dict())
        return d


@dataclass
class EpisodeRecord:
    config: dict
    config_hash: str
    steps: list[StepLog]
    status: str  # success | failure | timeout
    path_length: float
    shortest_path: float
    covered: int
    reachable: int
    target_class: str
    seed: int

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def collisions(self) -> int:
        return sum(1 for s in self.steps if s.collided)

    @property
    def fcr(self) -> float:
        return 100.0 * self.covered / self.reachable if self.reachable else 0.0

    def header(self) -> dict:
        return {"type": "header", "format": LOG_FORMAT, "version": LOG_VERSION,
                "config_hash": self.config_hash, "seed": self.seed, "config": self.config,
                "status": self.status, "path_length": self.path_length,
                "shortest_path": _json_float(self.shortest_path), "covered": self.covered,
                "reachable": self.reachable, "target_class": self.target_class,
                "steps": self.n_steps, "collisions": self.collisions}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps(s.to_dict(), sort_keys=True) for s in self.steps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeRecord":
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        if not lines or lines[0].get("type") != "header" or lines[0].get("format") != LOG_FORMAT:
            raise ConfigError("not a trajectory log")
        h = lines[0]
        steps = []
        for d in lines[1:]:
            rw = RewardBreakdown(**{k: d[k] for k in RewardBreakdown.__dataclass_fields__})
            steps.append(StepLog(d["step"], d["x"], d["y"], d["z"], d["yaw"], d["action"], d["policy"],
                                 d["collided"], d["detected"], d["rho_min"], rw))
        return cls(h["config"], h["config_hash"], steps, h["status"], h["path_length"],
                   _from_json_float(h["shortest_path"]), h["covered"], h["reachable"], h["target_class"],
                   h["seed"])


def _json_float(x: float):
    return x if math.isfinite(x) else None


def _from_json_float(x):
    return math.inf if x is None else float(x)


def build_controller(spec: str, revert_k: int = DEFAULT_REVERT_K):
    explore, goal = CoverageExplore(), ScriptedGoal()
    if spec == "scripted-dual":
        return DualController(explore, goal, revert_k)
    if spec == "random":
        return SingleController(RandomPolicy(), Mode.EXPLORE)
    if spec == "explore-only":
        return SingleController(explore, Mode.EXPLORE)
    if spec == "goal-only":
        return SingleController(goal, Mode.GOAL)
    if spec == "explore-rules":
        return SingleController(ScriptedExplore(), Mode.EXPLORE)
    if spec.startswith("trained:"):
        params = load_checkpoint(spec.split(":", 1)[1])
        return trained_controller(params, revert_k)
    raise ConfigError(f"unknown policy spec {spec!r}; expected one of {POLICY_SPECS}")


def trained_controller(params, revert_k: int = DEFAULT_REVERT_K):
    """Dual controller with the learned policy in its trained role."""
    from ..policy.trainer import action_mask_for

    learned = ActorCriticPolicy(params, action_mask_for(params.role))
    if params.role == "explore":
        return DualController(learned, ScriptedGoal(), revert_k)
    return DualController(CoverageExplore(), learned, revert_k)


def run_episode(cfg: EpisodeConfig, controller=None) -> EpisodeRecord:
    if cfg.max_steps < 1:
        raise ConfigError("max_steps must be >= 1")
    if cfg.reward_engine not in ("auto", "goal", "explore"):
        raise ConfigError(f"unknown reward engine {cfg.reward_engine!r}")
    controller = controller or build_controller(cfg.policy, cfg.revert_k)
    controller.reset()
    env = NavEnv(cfg.scene, cfg.target_class, cfg.start_pose(), k=cfg.intrinsics, noise=cfg.noise,
                 seed=cfg.seed, perception=cfg.perception, goal_cfg=cfg.goal_cfg,
                 explore_cfg=cfg.explore_cfg, track_coverage=cfg.track_coverage)
    obs = env.reset()
    memories: dict = {}
    action_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])
    steps: list[StepLog] = []
    status = "timeout"
    prev_mode = None
    for t in range(cfg.max_steps):
        mode = controller.switch(obs.detection.present)
        policy = controller.policy_for(mode)
        key = id(policy)
        if key not in memories or (mode != prev_mode and prev_mode is not None):
            # the other policy moved the agent meanwhile; stale recurrent state would mislead
            memories[key] = policy.reset()
        prev_mode = mode
        probs, memories[key] = policy.act(obs.bundle, memories[key])
        stochastic = getattr(policy, "stochastic", False) or not cfg.greedy
        action = sample(probs, action_rng) if stochastic else greedy(probs)
        engine = cfg.reward_engine if cfg.reward_engine != "auto" else mode.value
        tr = env.step(action, engine)
        p = env.pose
        steps.append(StepLog(t, p.position[0], p.position[1], p.position[2], p.yaw, action.label, mode.value,
                             tr.collided, bool(tr.obs.detection.present), float(tr.obs.bundle.scan.closest),
                             tr.reward))
        obs = tr.obs
        if tr.done:
            status = "success" if tr.success else "failure"
            break
    shortest = math.inf
    if cfg.compute_spl and cfg.scene.instances_of(cfg.target_class):
        shortest = shortest_success_path(cfg.scene, cfg.start_pose().position, cfg.target_class,
                                         cfg.intrinsics)
    cov = env.coverage
    return EpisodeRecord(cfg.to_dict(), cfg.config_hash(), steps, status, env.path_length, shortest,
                         cov.n_covered if cov is not None else 0, cov.reachable if cov is not None else 0,
                         cfg.target_class, cfg.seed)
