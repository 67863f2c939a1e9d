from __future__ import annotations

import numpy as np

from ..perception import FeatureBundle
from ..simulator.kinematics import N_ACTIONS, Action


def one_hot(action: Action) -> np.ndarray:
    p = np.zeros(N_ACTIONS)
    p[int(action)] = 1.0
    return p


def greedy(probs: np.ndarray) -> Action:
    """Argmax with ties broken by the lowest action index."""
    return Action(int(np.argmax(probs)))


def sample(probs: np.ndarray, rng: np.random.Generator) -> Action:
    c = np.cumsum(probs)
    return Action(int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), N_ACTIONS - 1)))


class Policy:
    """act(bundle, memory) -> (distribution over the six actions, new memory)."""

    name = "policy"

    def reset(self):
        return None

    def act(self, bundle: FeatureBundle, memory=None) -> tuple[np.ndarray, object]:
        raise NotImplementedError


class RulePolicy(Policy):
    """Deterministic policy defined by a rule function over the bundle."""

    def choose(self, bundle: FeatureBundle) -> Action:
        raise NotImplementedError

    def act(self, bundle, memory=None):
        return one_hot(self.choose(bundle)), memory

    def __call__(self, bundle: FeatureBundle) -> Action:
        return self.choose(bundle)
