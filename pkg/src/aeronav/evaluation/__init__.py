"""Episode runner, coverage bookkeeping, navigation metrics, replay and training helpers."""

from .artifacts import depth_pgm, pgm_bytes, ppm_bytes, read_pnm, roi_pgm, scan_csv, semantic_csv, topdown_image
from .coverage import CoverageState, update_coverage
from .env import NavEnv, Observation, PerceptionConfig, perceive
from .metrics import EpisodeSummary, MetricsReport, compute_metrics, spl_term
from .replay import ReplayVerdict, replay
from .runner import EpisodeConfig, EpisodeRecord, StepLog, build_controller, canonical_hash, run_episode
from .training import ScenePoolSampler, derive_seed, rollout_rewards

__all__ = [
    "CoverageState", "EpisodeConfig", "EpisodeRecord", "EpisodeSummary", "MetricsReport", "NavEnv",
    "Observation", "PerceptionConfig", "ReplayVerdict", "ScenePoolSampler", "StepLog", "build_controller",
    "canonical_hash", "compute_metrics", "depth_pgm", "derive_seed", "perceive", "pgm_bytes", "ppm_bytes",
    "read_pnm", "replay", "roi_pgm", "rollout_rewards", "run_episode", "scan_csv", "semantic_csv", "spl_term",
    "topdown_image", "update_coverage",
]
