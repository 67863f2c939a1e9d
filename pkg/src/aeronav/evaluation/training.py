"""Episode samplers feeding the actor-critic trainer and its held-out evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..geometry import Pose
from ..policy.base import greedy, sample
from ..simulator.kinematics import is_valid_position
from ..simulator.queries import reachable_free_cells
from ..simulator.scene import VoxelScene
from .env import NavEnv

MIN_START_Z = 0.4
MAX_START_Z = 1.4


def derive_seed(*path: int) -> int:
    """Hierarchical child seed: the same path always yields the same value."""
    return int(np.random.SeedSequence([int(p) for p in path]).generate_state(1)[0])


@dataclass
class ScenePoolSampler:
    """``sampler(i)`` -> (scene, start pose, target class, episode seed), deterministic in i.

    Goal-role episodes start between ``near_min`` and ``near_radius`` metres
    from a target instance so that short training episodes see the target
    but cannot succeed without moving; explore-role episodes start anywhere
    reachable.
    """

    scenes: list[VoxelScene]
    role: str
    seed: int = 0
    near_radius: float = 2.5
    near_min: float = 0.0

    def __post_init__(self):
        if not self.scenes:
            raise ConfigError("sampler needs at least one scene")
        if self.role not in ("explore", "goal"):
            raise ConfigError(f"unknown role {self.role!r}")
        self._cells = {}

    def _candidates(self, idx: int) -> np.ndarray:
        if idx not in self._cells:
            scene = self.scenes[idx]
            cells = np.argwhere(reachable_free_cells(scene))
            centers = (cells + 0.5) * scene.resolution
            keep = (centers[:, 2] > MIN_START_Z) & (centers[:, 2] < MAX_START_Z)
            keep &= np.array([is_valid_position(scene, c) for c in centers])
            self._cells[idx] = centers[keep]
        return self._cells[idx]

    def __call__(self, i: int) -> tuple[VoxelScene, Pose, str, int]:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, int(i)]))
        idx = int(rng.integers(len(self.scenes)))
        scene = self.scenes[idx]
        centers = self._candidates(idx)
        targets = [o for o in scene.objects if o.is_target_candidate]
        if self.role == "goal":
            if not targets:
                raise ConfigError(f"scene {idx} has no target objects for goal training")
            obj = targets[int(rng.integers(len(targets)))]
            near = centers[[self.near_min <= obj.distance_to(c) <= self.near_radius for c in centers]]
            centers = near if len(near) else centers
            label = obj.label
        else:
            label = targets[0].label if targets else scene.class_names[0]
        if len(centers) == 0:
            raise ConfigError(f"scene {idx} has no valid start cell")
        p = centers[int(rng.integers(len(centers)))]
        yaw = float(rng.integers(12)) * math.pi / 6.0 - math.pi
        return scene, Pose(tuple(float(v) for v in p), yaw), label, derive_seed(self.seed, i)


def rollout_rewards(policy, sampler, episodes: int, engine: str, max_steps: int, *, greedy_actions: bool = True,
                    offset: int = 0, rng_seed: int = 0) -> np.ndarray:
    """Mean per-step reward of ``policy`` on ``episodes`` sampled episodes.

    Stochastic policies (``policy.stochastic``) sample from their distribution
    with a per-episode generator; the rest act greedily unless told otherwise.
    """
    out = np.zeros(episodes)
    for n in range(episodes):
        scene, start, target, seed = sampler(offset + n)
        env = NavEnv(scene, target, start, seed=seed, track_coverage=False)
        obs = env.reset()
        mem = policy.reset()
        rng = np.random.default_rng(derive_seed(rng_seed, offset + n))
        total = 0.0
        steps = 0
        for _ in range(max_steps):
            probs, mem = policy.act(obs.bundle, mem)
            stochastic = getattr(policy, "stochastic", False) or not greedy_actions
            a = sample(probs, rng) if stochastic else greedy(probs)
            tr = env.step(a, engine)
            total += tr.reward.total
            steps += 1
            obs = tr.obs
            if tr.done:
                break
        out[n] = total / steps
    return out

