"""Visibility-based free-space coverage (FCR bookkeeping)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DEFAULT_EXTRINSICS, DEFAULT_INTRINSICS, CameraIntrinsics, Extrinsics, Pose
from ..simulator.queries import reachable_free_cells
from ..simulator.raycast import cells_visible
from ..simulator.scene import VoxelScene
from ..simulator.sensors import camera_world_transform


@dataclass
class CoverageState:
    cells: np.ndarray    # (m, 3) reachable free cell indices
    centers: np.ndarray  # (m, 3) their centres in metres
    covered: np.ndarray  # (m,) bool

    @classmethod
    def for_scene(cls, scene: VoxelScene, start=None) -> "CoverageState":
        cells = np.argwhere(reachable_free_cells(scene, start)).astype(np.int64)
        return cls(cells, (cells + 0.5) * scene.resolution, np.zeros(len(cells), dtype=bool))

    @property
    def reachable(self) -> int:
        return len(self.cells)

    @property
    def n_covered(self) -> int:
        return int(self.covered.sum())

    @property
    def fcr(self) -> float:
        return 100.0 * self.n_covered / self.reachable if self.reachable else 0.0


def in_frustum(centers: np.ndarray, pose: Pose, k: CameraIntrinsics,
               extrinsics: Extrinsics = DEFAULT_EXTRINSICS) -> np.ndarray:
    rot, origin = camera_world_transform(pose, extrinsics)
    rel = centers - origin
    pc = rel @ rot
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (z > 0) & (np.abs(pc[:, 0]) <= z * (k.width / (2.0 * k.fx))) \
             & (np.abs(pc[:, 1]) <= z * (k.height / (2.0 * k.fy)))
    return ok & (np.einsum("ij,ij->i", rel, rel) <= k.max_range ** 2)


def update_coverage(state: CoverageState, pose: Pose, scene: VoxelScene,
                    k: CameraIntrinsics = DEFAULT_INTRINSICS,
                    extrinsics: Extrinsics = DEFAULT_EXTRINSICS) -> CoverageState:
    """Mark reachable free cells whose centres are in view and unoccluded. Never uncovers.

    The cell holding the agent counts as observed; its centre is never in front of the camera.
    """
    state.covered[np.all(state.cells == scene.cell_of(pose.position), axis=1)] = True
    todo = np.flatnonzero(~state.covered)
    if todo.size == 0:
        return state
    cand = todo[in_frustum(state.centers[todo], pose, k, extrinsics)]
    if cand.size:
        _, origin = camera_world_transform(pose, extrinsics)
        vis = cells_visible(scene.occupancy, scene.resolution, origin, state.cells[cand])
        state.covered[cand[vis]] = True
    return state
