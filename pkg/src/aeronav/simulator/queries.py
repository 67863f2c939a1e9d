"""Ground-truth queries: target distance, BFS geodesics and the success region."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..errors import ConfigError
from ..geometry import DEFAULT_INTRINSICS, CameraIntrinsics, Pose
from .kinematics import Action, is_valid_position
from .raycast import bfs_distances
from .scene import VoxelScene
from .sensors import DetectorNoise, detect

SUCCESS_DISTANCE = 1.5


def _position(p) -> np.ndarray:
    if isinstance(p, Pose):
        return p.as_array()
    return np.asarray(p, dtype=float)


def ground_truth_distance(scene: VoxelScene, pose, target_class: str) -> float:
    """Distance to the nearest point of the nearest target-class box (inf if none)."""
    scene.class_id(target_class)
    p = _position(pose)
    ds = [o.distance_to(p) for o in scene.instances_of(target_class)]
    return min(ds) if ds else math.inf


def free_mask(scene: VoxelScene) -> np.ndarray:
    return ~scene.occupancy


def bfs_from(scene: VoxelScene, start_cell, passable: np.ndarray | None = None) -> np.ndarray:
    """BFS step counts from ``start_cell`` (-1 where unreachable)."""
    passable = free_mask(scene) if passable is None else passable
    return bfs_distances(np.ascontiguousarray(passable), np.asarray(start_cell, dtype=np.int64), -1)


def reachable_free_cells(scene: VoxelScene, start=None) -> np.ndarray:
    """Boolean mask of free cells 6-connected to the start position's cell."""
    start = scene.start if start is None else _position(start)
    return bfs_from(scene, scene.cell_of(start)) >= 0


def geodesic_length(scene: VoxelScene, start, to_region) -> float:
    """Shortest 6-connected path over free cells, in metres.

    ``start`` is a position or a cell index tuple of ints; ``to_region`` is a
    boolean mask over the grid or an iterable of cell indices.
    """
    if isinstance(start, tuple) and all(isinstance(c, (int, np.integer)) for c in start):
        cell = start
    else:
        cell = scene.cell_of(_position(start))
    if isinstance(to_region, np.ndarray) and to_region.dtype == bool:
        region = to_region
    else:
        region = np.zeros(scene.dims, dtype=bool)
        for c in to_region:
            region[tuple(c)] = True
    if not scene.is_free_cell(cell) or not region.any():
        return math.inf
    dist = bfs_from(scene, cell)
    d = dist[region & (dist >= 0)]
    return float(d.min()) * scene.resolution if d.size else math.inf


def facing_pose(scene: VoxelScene, cell, target_class: str) -> Pose:
    """Pose at a cell centre, yawed toward the nearest target instance centre."""
    c = scene.cell_center(cell)
    inst = min(scene.instances_of(target_class), key=lambda o: o.distance_to(c))
    v = inst.center - c
    return Pose(tuple(c), math.atan2(v[1], v[0]))


def cell_qualifies(scene: VoxelScene, cell, target_class: str, k: CameraIntrinsics = DEFAULT_INTRINSICS) -> bool:
    """Success predicate for an agent teleported to ``cell`` facing the target (no detector noise)."""
    from ..rewards import success_check

    if not scene.is_free_cell(cell):
        return False
    centre = scene.cell_center(cell)
    if not is_valid_position(scene, centre):
        # the agent's clearance keeps it out of this cell
        return False
    dist = ground_truth_distance(scene, centre, target_class)
    if not dist < SUCCESS_DISTANCE:
        return False
    pose = facing_pose(scene, cell, target_class)
    det = detect(scene, pose, k, target_class, DetectorNoise())
    return success_check(det, (k.width, k.height), dist, Action.DONE)


def success_region(scene: VoxelScene, target_class: str, k: CameraIntrinsics = DEFAULT_INTRINSICS) -> np.ndarray:
    """Mask of free cells the agent can occupy and from which Done, facing the target, succeeds."""
    region = np.zeros(scene.dims, dtype=bool)
    if not scene.instances_of(target_class):
        return region
    res = scene.resolution
    span = int(math.ceil(SUCCESS_DISTANCE / res)) + 1
    for o in scene.instances_of(target_class):
        lo = np.maximum(np.floor(np.array(o.aabb_min) / res).astype(int) - span, 0)
        hi = np.minimum(np.floor(np.array(o.aabb_max) / res).astype(int) + span, np.array(scene.dims) - 1)
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for kk in range(lo[2], hi[2] + 1):
                    if not region[i, j, kk] and cell_qualifies(scene, (i, j, kk), target_class, k):
                        region[i, j, kk] = True
    return region


def shortest_success_path(scene: VoxelScene, start, target_class: str,
                          k: CameraIntrinsics = DEFAULT_INTRINSICS) -> float:
    """Geodesic length from ``start`` to the nearest success-region cell.

    Equivalent to ``geodesic_length(scene, start, success_region(...))`` but
    only evaluates the success predicate for cells in BFS order.
    """
    scene.class_id(target_class)
    if not scene.instances_of(target_class):
        return math.inf
    start_cell = scene.cell_of(_position(start))
    if not scene.is_free_cell(start_cell):
        raise ConfigError(f"start {start} is not in free space")
    free = free_mask(scene)
    dims = scene.dims
    seen = np.zeros(dims, dtype=bool)
    seen[start_cell] = True
    frontier = deque([(start_cell, 0)])
    cache: dict = {}
    while frontier:
        cell, d = frontier.popleft()
        if cell not in cache:
            cache[cell] = cell_qualifies(scene, cell, target_class, k)
        if cache[cell]:
            return d * scene.resolution
        x, y, z = cell
        for nb in ((x + 1, y, z), (x - 1, y, z), (x, y + 1, z), (x, y - 1, z), (x, y, z + 1), (x, y, z - 1)):
            if 0 <= nb[0] < dims[0] and 0 <= nb[1] < dims[1] and 0 <= nb[2] < dims[2] \
                    and free[nb] and not seen[nb]:
                seen[nb] = True
                frontier.append((nb, d + 1))
    return math.inf
