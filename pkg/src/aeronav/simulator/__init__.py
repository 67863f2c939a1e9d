"""Deterministic voxel-world simulator."""

from .generate import DEFAULT_TAXONOMY, FURNITURE, TARGETS, SceneConfig, generate_scene, navigable_mask
from .kinematics import (
    CLEARANCE,
    MOTION_ACTIONS,
    N_ACTIONS,
    STEP_M,
    TURN_RAD,
    Action,
    AgentState,
    collides,
    is_valid_position,
    step,
)
from .queries import (
    SUCCESS_DISTANCE,
    geodesic_length,
    ground_truth_distance,
    reachable_free_cells,
    shortest_success_path,
    success_region,
)
from .scene import ObjectInstance, VoxelScene
from .sensors import Detection, DetectorNoise, Frames, detect, project_box, render, render_full

__all__ = [
    "Action", "AgentState", "CLEARANCE", "DEFAULT_TAXONOMY", "Detection", "DetectorNoise", "FURNITURE",
    "Frames", "MOTION_ACTIONS", "N_ACTIONS", "ObjectInstance", "STEP_M", "SUCCESS_DISTANCE", "SceneConfig",
    "TARGETS", "TURN_RAD", "VoxelScene", "collides", "detect", "generate_scene", "geodesic_length",
    "ground_truth_distance", "is_valid_position", "navigable_mask", "project_box", "reachable_free_cells",
    "render", "render_full", "shortest_success_path", "step", "success_region",
]
