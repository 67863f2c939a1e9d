"""Policies, the dual-policy controller and the actor-critic trainer."""

from .actor_critic import ActorCriticParams, ActorCriticPolicy, load_checkpoint, save_checkpoint
from .base import Policy, greedy, sample
from .explorer import CoverageExplore, ExploreMemory
from .controller import DEFAULT_REVERT_K, DualController, Mode, SingleController
from .scripted import RandomPolicy, ScriptedExplore, ScriptedGoal
from .trainer import TrainResult, action_mask_for, train_actor_critic

__all__ = [
    "ActorCriticParams", "ActorCriticPolicy", "CoverageExplore", "ExploreMemory", "DEFAULT_REVERT_K", "DualController", "Mode", "Policy",
    "RandomPolicy", "ScriptedExplore", "ScriptedGoal", "SingleController", "TrainResult", "action_mask_for",
    "greedy", "load_checkpoint", "sample", "save_checkpoint", "train_actor_critic",
]
