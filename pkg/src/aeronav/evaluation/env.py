"""Step-wise navigation environment shared by the episode runner and the trainer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigError
from ..geometry import DEFAULT_EXTRINSICS, DEFAULT_INTRINSICS, CameraIntrinsics, Pose
from ..perception import (
    FeatureBundle,
    SyntheticEmbedder,
    assemble_bundle,
    bbox_feature,
    depth_to_scan,
    extract_roi,
    similarity_map,
)
from ..rewards import (
    ExploreRewardConfig,
    GoalRewardConfig,
    RewardBreakdown,
    explore_reward,
    goal_reward,
    success_check,
)
from ..simulator.kinematics import Action, AgentState, is_valid_position, step
from ..simulator.queries import ground_truth_distance
from ..simulator.scene import VoxelScene
from ..simulator.sensors import Detection, DetectorNoise, Frames, detect, render_full
from .coverage import CoverageState, update_coverage

PARENT_MIN_PIXELS = 20


@dataclass(frozen=True)
class PerceptionConfig:
    n_sectors: int = 16
    half_height_d: float = 0.1
    percentile_q: float = 0.10
    patch_grid: tuple[int, int] = (7, 7)
    ground_eps: float = 0.1
    embed_dim: int = 32
    embed_seed: int = 0

    def to_dict(self) -> dict:
        return {"n_sectors": self.n_sectors, "half_height_d": self.half_height_d,
                "percentile_q": self.percentile_q, "patch_grid": list(self.patch_grid),
                "ground_eps": self.ground_eps, "embed_dim": self.embed_dim, "embed_seed": self.embed_seed}


@lru_cache(maxsize=8)
def _embedder(class_names: tuple, taxonomy_items: tuple, dim: int, seed: int) -> SyntheticEmbedder:
    return SyntheticEmbedder(class_names, dim=dim, seed=seed, taxonomy=dict(taxonomy_items))


def embedder_for(scene: VoxelScene, pc: PerceptionConfig) -> SyntheticEmbedder:
    return _embedder(tuple(scene.class_names), tuple(sorted(scene.taxonomy.items(), key=lambda kv: kv[0])),
                     pc.embed_dim, pc.embed_seed)


@dataclass
class Observation:
    frames: Frames
    detection: Detection
    bundle: FeatureBundle
    distance: float
    parent_visible: bool


@dataclass
class Transition:
    obs: Observation
    reward: RewardBreakdown
    goal: RewardBreakdown
    explore: RewardBreakdown
    collided: bool
    done: bool
    success: bool


def perceive(scene: VoxelScene, pose: Pose, target_class: str, k: CameraIntrinsics,
             pc: PerceptionConfig, noise: DetectorNoise, rng: np.random.Generator,
             embedder=None) -> Observation:
    frames = render_full(scene, pose, k)
    det = detect(scene, pose, k, target_class, noise, rng, instances=frames.instances)
    height = pose.altitude - scene.floor_z
    scan = depth_to_scan(frames.depth, k, DEFAULT_EXTRINSICS, pc.half_height_d, pc.n_sectors,
                         height_above_floor=height, ground_eps=pc.ground_eps)
    roi = extract_roi(frames.depth, k, DEFAULT_EXTRINSICS, pc.percentile_q,
                      height_above_floor=height, ground_eps=pc.ground_eps)
    sem = similarity_map(frames.classes, embedder or embedder_for(scene, pc), target_class, pc.patch_grid)
    bb = bbox_feature(det, k, pose.altitude)
    bundle = assemble_bundle(scan, roi, sem, bb, pose.altitude, scene.ceiling_z, k.max_range)
    parent = scene.parent_of(target_class)
    parent_visible = parent is not None and \
        int(np.count_nonzero(frames.classes == scene.class_id(parent))) >= PARENT_MIN_PIXELS
    return Observation(frames, det, bundle, ground_truth_distance(scene, pose, target_class), parent_visible)


class NavEnv:
    def __init__(self, scene: VoxelScene, target_class: str, start: Pose | None = None, *,
                 k: CameraIntrinsics = DEFAULT_INTRINSICS, noise: DetectorNoise = DetectorNoise(),
                 seed: int = 0, perception: PerceptionConfig = PerceptionConfig(),
                 goal_cfg: GoalRewardConfig = GoalRewardConfig(),
                 explore_cfg: ExploreRewardConfig = ExploreRewardConfig(),
                 track_coverage: bool = True):
        scene.class_id(target_class)
        self.scene = scene
        self.target_class = target_class
        self.start = start or Pose(scene.start, scene.start_yaw)
        if not is_valid_position(scene, self.start.position):
            raise ConfigError(f"start pose {self.start.position} is not in free space")
        self.k = k
        self.noise = noise
        self.seed = seed
        self.perception = perception
        self.goal_cfg = goal_cfg
        self.explore_cfg = explore_cfg
        self.track_coverage = track_coverage
        self.embedder = embedder_for(scene, perception)
        self._coverage_template = None

    def reset(self) -> Observation:
        self.rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
        self.state = AgentState(self.start)
        self.obs = self._perceive()
        self.parent_seen = self.obs.parent_visible
        self.path_length = 0.0
        self.collisions = 0
        self.steps = 0
        self.coverage = None
        if self.track_coverage:
            if self._coverage_template is None:
                self._coverage_template = CoverageState.for_scene(self.scene, self.start.position)
            t = self._coverage_template
            self.coverage = CoverageState(t.cells, t.centers, np.zeros_like(t.covered))
            update_coverage(self.coverage, self.state.pose, self.scene, self.k)
        return self.obs

    def _perceive(self) -> Observation:
        return perceive(self.scene, self.state.pose, self.target_class, self.k, self.perception,
                        self.noise, self.rng, self.embedder)

    def step(self, action: Action, engine: str = "goal") -> Transition:
        action = Action(action)
        prev = self.obs
        self.steps += 1
        if action == Action.DONE:
            success = success_check(prev.detection, (self.k.width, self.k.height), prev.distance, action)
            g = goal_reward(prev.distance, prev.distance, False, prev.bundle.bbox.area_ratio, success, False,
                            self.goal_cfg)
            roi = prev.bundle.roi
            e = explore_reward(roi.z_mean, roi.z_mean, roi.dx, roi.dy, prev.bundle.scan.closest,
                               self.explore_cfg)
            self.state = AgentState(self.state.pose, False, self.state.steps_taken + 1)
            return Transition(prev, g if engine == "goal" else e, g, e, False, True, success)

        old = self.state.pose.as_array()
        self.state, collided, _ = step(self.scene, self.state, action)
        self.path_length += float(np.linalg.norm(self.state.pose.as_array() - old))
        self.collisions += int(collided)
        obs = self._perceive()
        if self.coverage is not None:
            update_coverage(self.coverage, self.state.pose, self.scene, self.k)
        first_parent = obs.parent_visible and not self.parent_seen
        self.parent_seen = self.parent_seen or obs.parent_visible
        g = goal_reward(prev.distance, obs.distance, first_parent, obs.bundle.bbox.area_ratio, False,
                        collided, self.goal_cfg)
        r0, r1 = prev.bundle.roi, obs.bundle.roi
        z0, z1 = (r0.z_mean, r1.z_mean) if (r0.valid and r1.valid) else (0.0, 0.0)
        e = explore_reward(z0, z1, r1.dx, r1.dy, obs.bundle.scan.closest, self.explore_cfg)
        self.obs = obs
        return Transition(obs, g if engine == "goal" else e, g, e, collided, False, False)

    @property
    def pose(self) -> Pose:
        return self.state.pose

    @property
    def fcr(self) -> float:
        return self.coverage.fcr if self.coverage is not None else math.nan
