"""Raycast depth/class rendering and the oracle object detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError
from ..geometry import DEFAULT_EXTRINSICS, DEFAULT_INTRINSICS, CameraIntrinsics, Extrinsics, Pose
from .raycast import cast_rays
from .scene import ObjectInstance, VoxelScene

NEAR_PLANE = 1e-3
# projected boxes thinner than this (pixels) are tangent views and count as empty
MIN_BOX_PX = 1e-9


class Frames(NamedTuple):
    depth: np.ndarray      # (H, W) z-depth in metres, 0 = invalid / out of range
    classes: np.ndarray    # (H, W) class ids, 0 = structure / nothing
    instances: np.ndarray  # (H, W) instance grid values, 0 = structure, -1 = no hit


@lru_cache(maxsize=16)
def _camera_rays(k: CameraIntrinsics):
    v, u = np.mgrid[0:k.height, 0:k.width]
    d = np.stack([(u - k.cu) / k.fx, (v - k.cv) / k.fy, np.ones(u.shape)], axis=-1).reshape(-1, 3)
    norm = np.linalg.norm(d, axis=1)
    return d / norm[:, None], norm


def camera_world_transform(pose: Pose, extrinsics: Extrinsics = DEFAULT_EXTRINSICS):
    """(rotation camera->world, camera origin in world)."""
    rw = pose.body_to_world()
    return rw @ extrinsics.rotation, pose.as_array() + rw @ extrinsics.translation


def cast_pixels(scene: VoxelScene, pose: Pose, k: CameraIntrinsics, pixel_index: np.ndarray | None = None,
                extrinsics: Extrinsics = DEFAULT_EXTRINSICS):
    """Raw (range along ray, ray-norm factor, instance) for the chosen flat pixel indices."""
    unit, norm = _camera_rays(k)
    if pixel_index is not None:
        unit, norm = unit[pixel_index], norm[pixel_index]
    rot, origin = camera_world_transform(pose, extrinsics)
    dirs = np.ascontiguousarray(unit @ rot.T)
    max_t = float(np.linalg.norm(scene.extent)) + scene.resolution
    t, inst = cast_rays(scene.occupancy, scene.instance_grid, scene.resolution, origin, dirs, max_t)
    return t, norm, inst


def render_full(scene: VoxelScene, pose: Pose, k: CameraIntrinsics = DEFAULT_INTRINSICS,
                extrinsics: Extrinsics = DEFAULT_EXTRINSICS) -> Frames:
    t, norm, inst = cast_pixels(scene, pose, k, None, extrinsics)
    depth = np.where(t <= k.max_range, t / norm, 0.0)
    classes = np.where(inst > 0, scene.instance_class_ids[np.maximum(inst, 0)], 0).astype(np.int32)
    return Frames(depth.reshape(k.shape), classes.reshape(k.shape), inst.reshape(k.shape))


def render(scene: VoxelScene, pose: Pose, k: CameraIntrinsics = DEFAULT_INTRINSICS,
           extrinsics: Extrinsics = DEFAULT_EXTRINSICS) -> tuple[np.ndarray, np.ndarray]:
    """Depth frame (z-depth, 0 beyond ``k.max_range``) and class-id frame."""
    f = render_full(scene, pose, k, extrinsics)
    return f.depth, f.classes


# -- detection ---------------------------------------------------------------

@dataclass(frozen=True)
class DetectorNoise:
    miss_prob: float = 0.0
    jitter_px: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("miss_prob must lie in [0, 1]")
        if self.jitter_px < 0:
            raise ConfigError("jitter_px must be nonnegative")


@dataclass(frozen=True)
class Detection:
    present: bool
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)  # u_min, v_min, u_max, v_max
    label: str = ""
    instance_id: int = -1
    visible_frac: float = 0.0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.bbox[0] + self.bbox[2]) / 2.0, (self.bbox[1] + self.bbox[3]) / 2.0)

    @property
    def area(self) -> float:
        return max(self.bbox[2] - self.bbox[0], 0.0) * max(self.bbox[3] - self.bbox[1], 0.0)

    @classmethod
    def absent(cls, label: str = "") -> "Detection":
        return cls(False, label=label)


_BOX_EDGES = [(a, b) for a in range(8) for b in range(a + 1, 8) if bin(a ^ b).count("1") == 1]


def project_box(obj: ObjectInstance, pose: Pose, k: CameraIntrinsics,
                extrinsics: Extrinsics = DEFAULT_EXTRINSICS):
    """Image-plane bounds of the box clipped to the near plane, or None if behind the camera.

    The returned bounds are clipped to [0, W] x [0, H] and may be empty.
    """
    rot, origin = camera_world_transform(pose, extrinsics)
    pc = (obj.corners() - origin) @ rot
    pts = [p for p in pc if p[2] >= NEAR_PLANE]
    for a, b in _BOX_EDGES:
        za, zb = pc[a, 2], pc[b, 2]
        if (za - NEAR_PLANE) * (zb - NEAR_PLANE) < 0:
            s = (NEAR_PLANE - za) / (zb - za)
            pts.append(pc[a] + s * (pc[b] - pc[a]))
    if not pts:
        return None
    uv = k.project(np.array(pts))
    u0, v0 = uv.min(axis=0)
    u1, v1 = uv.max(axis=0)
    return (float(np.clip(u0, 0, k.width)), float(np.clip(v0, 0, k.height)),
            float(np.clip(u1, 0, k.width)), float(np.clip(v1, 0, k.height)))


def _box_pixels(box, k: CameraIntrinsics) -> np.ndarray:
    u0, v0, u1, v1 = box
    us = np.arange(math.ceil(u0), math.floor(u1) + 1)
    vs = np.arange(math.ceil(v0), math.floor(v1) + 1)
    us = us[(us >= 0) & (us < k.width)]
    vs = vs[(vs >= 0) & (vs < k.height)]
    if us.size == 0 or vs.size == 0:
        # sub-pixel box: sample the pixel nearest its centre
        us = np.array([min(max(int(round((u0 + u1) / 2)), 0), k.width - 1)])
        vs = np.array([min(max(int(round((v0 + v1) / 2)), 0), k.height - 1)])
    return (vs[:, None] * k.width + us[None, :]).ravel()


def detect(scene: VoxelScene, pose: Pose, k: CameraIntrinsics, target_class: str,
           noise: DetectorNoise = DetectorNoise(), rng: np.random.Generator | None = None,
           min_visible_frac: float = 0.05, instances: np.ndarray | None = None,
           extrinsics: Extrinsics = DEFAULT_EXTRINSICS) -> Detection:
    """Oracle detector: project each target instance and test visibility per pixel.

    ``instances`` may carry a pre-rendered instance frame; otherwise only the
    pixels under each projected box are cast.
    """
    scene.class_id(target_class)
    if rng is None:
        rng = np.random.default_rng(0)
    # fixed draw order keeps the stream aligned regardless of the outcome
    miss_draw = rng.random()
    jitter = rng.uniform(-1.0, 1.0, size=4) * noise.jitter_px

    best = None
    for n, obj in enumerate(scene.objects):
        if obj.label != target_class:
            continue
        box = project_box(obj, pose, k, extrinsics)
        if box is None or box[2] - box[0] <= MIN_BOX_PX or box[3] - box[1] <= MIN_BOX_PX:
            continue
        pix = _box_pixels(box, k)
        if instances is not None:
            seen = instances.ravel()[pix]
        else:
            t, _, seen = cast_pixels(scene, pose, k, pix, extrinsics)
        hits = int(np.count_nonzero(seen == n + 1))
        frac = hits / pix.size
        if frac >= min_visible_frac and hits > 0 and (best is None or hits > best[0]):
            best = (hits, frac, box, obj)
    if best is None:
        return Detection.absent(target_class)
    if miss_draw < noise.miss_prob:
        return Detection.absent(target_class)
    hits, frac, box, obj = best
    if noise.jitter_px > 0:
        u0, v0, u1, v1 = (np.array(box) + jitter).tolist()
        u0, u1 = sorted((min(max(u0, 0.0), k.width), min(max(u1, 0.0), k.width)))
        v0, v1 = sorted((min(max(v0, 0.0), k.height), min(max(v1, 0.0), k.height)))
        if u1 <= u0 or v1 <= v0:
            return Detection.absent(target_class)
        box = (u0, v0, u1, v1)
    return Detection(True, tuple(float(b) for b in box), target_class, obj.id, frac)


def class_visible(classes: np.ndarray, scene: VoxelScene, label: str, min_pixels: int = 1) -> bool:
    return int(np.count_nonzero(classes == scene.class_id(label))) >= min_pixels
