"""Single-threaded n-step advantage actor-critic training."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConfigError, TrainingError
from ..geometry import Pose
from ..simulator.kinematics import N_ACTIONS, Action
from ..simulator.scene import VoxelScene
from .actor_critic import ActorCriticParams, ActorCriticPolicy, Adam, forward, loss_and_grads
from .base import sample

log = logging.getLogger(__name__)

# (episode index) -> (scene, start pose, target class, episode seed)
EnvSampler = Callable[[int], tuple[VoxelScene, Pose, str, int]]


def action_mask_for(role: str) -> np.ndarray | None:
    """Exploration never needs Done; letting it end episodes early is a reward hack."""
    if role == "explore":
        m = np.ones(N_ACTIONS, dtype=bool)
        m[int(Action.DONE)] = False
        return m
    if role == "goal":
        return None
    raise ConfigError(f"unknown policy role {role!r}")


@dataclass
class TrainResult:
    params: ActorCriticParams
    curve: list[float]


def discounted_returns(rewards, bootstrap: float, discount: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = bootstrap
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + discount * acc
        out[i] = acc
    return out


def train_actor_critic(env_sampler: EnvSampler, reward_engine: str, params: ActorCriticParams,
                       episodes: int, *, max_steps: int = 40, n_step: int = 20, env_kwargs: dict | None = None,
                       progress: Callable[[int, float], None] | None = None) -> TrainResult:
    """Train a copy of ``params`` against the chosen reward engine."""
    from ..evaluation.env import NavEnv

    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    if reward_engine not in ("goal", "explore"):
        raise ConfigError(f"unknown reward engine {reward_engine!r}")
    params = params.copy()
    params.role = reward_engine
    mask = action_mask_for(reward_engine)
    policy = ActorCriticPolicy(params, mask)
    opt = Adam(params, params.lr)
    rng = np.random.default_rng(np.random.SeedSequence(params.seed).spawn(3)[2])
    curve: list[float] = []
    global_step = 0
    for ep in range(episodes):
        scene, start, target, seed = env_sampler(ep)
        env = NavEnv(scene, target, start, seed=seed, track_coverage=False, **(env_kwargs or {}))
        obs = env.reset()
        mem = policy.reset()
        xs, acts, rews = [], [], []
        ep_rewards = []
        for t in range(max_steps):
            inp, mem = policy.features(obs.bundle, mem)
            probs, _, _ = forward(params, inp, mask)
            a = sample(probs[0], rng)
            tr = env.step(a, reward_engine)
            global_step += 1
            xs.append(inp)
            acts.append(int(a))
            rews.append(tr.reward.total)
            ep_rewards.append(tr.reward.total)
            obs = tr.obs
            last = tr.done or t == max_steps - 1
            if last or len(xs) == n_step:
                bootstrap = 0.0 if tr.done else policy.value(obs.bundle, mem)
                x = np.array(xs)
                returns = discounted_returns(rews, bootstrap, params.discount)
                _, values, _ = forward(params, x, mask)
                loss, grads = loss_and_grads(params, x, np.array(acts), returns, returns - values, mask)
                if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingError(f"non-finite loss at episode {ep}, step {global_step}")
                opt.update(params, grads)
                if not params.is_finite():
                    raise TrainingError(f"non-finite parameters at episode {ep}, step {global_step}")
                xs, acts, rews = [], [], []
            if tr.done:
                break
        curve.append(float(np.mean(ep_rewards)))
        if progress is not None:
            progress(ep, curve[-1])
    return TrainResult(params, curve)
