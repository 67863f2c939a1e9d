"""Pinhole camera model, rigid frame transforms and point-cloud helpers.

Conventions used throughout the package:

* camera frame: x right, y down, z forward (optical axis)
* body frame:   x forward, y left, z up
* world frame:  z up, yaw measured counter-clockwise from +x
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError

CAMERA = "camera"
BODY = "body"


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cu: float
    cv: float
    width: int
    height: int
    max_range: float = 3.0
    hfov: float = field(init=False)

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError("focal lengths must be positive")
        if not (0 < self.cu < self.width and 0 < self.cv < self.height):
            raise ConfigError("principal point must lie inside the image")
        if self.max_range <= 0:
            raise ConfigError("max_range must be positive")
        object.__setattr__(self, "hfov", 2.0 * math.atan(self.width / (2.0 * self.fx)))

    @classmethod
    def from_fov(cls, width: int = 80, height: int = 60, hfov_deg: float = 90.0,
                 max_range: float = 3.0) -> "CameraIntrinsics":
        """Square pixels, principal point at the image centre."""
        fx = width / (2.0 * math.tan(math.radians(hfov_deg) / 2.0))
        return cls(fx=fx, fy=fx, cu=width / 2.0, cv=height / 2.0,
                   width=width, height=height, max_range=max_range)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def vfov(self) -> float:
        return 2.0 * math.atan(self.height / (2.0 * self.fy))

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cu], [0.0, self.fy, self.cv], [0.0, 0.0, 1.0]])

    def project(self, points_c: np.ndarray) -> np.ndarray:
        """Camera-frame points (n, 3) to pixel coordinates (n, 2)."""
        p = np.asarray(points_c, dtype=float).reshape(-1, 3)
        u = self.fx * p[:, 0] / p[:, 2] + self.cu
        v = self.fy * p[:, 1] / p[:, 2] + self.cv
        return np.stack([u, v], axis=1)


DEFAULT_INTRINSICS = CameraIntrinsics(fx=40.0, fy=40.0, cu=40.0, cv=30.0, width=80, height=60)  # 90 deg hfov


@dataclass(frozen=True)
class Extrinsics:
    """Camera-to-body rigid transform p_b = R p_c + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0.0):
            raise ConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ConfigError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def forward_camera(cls, translation=(0.0, 0.0, 0.0)) -> "Extrinsics":
        """Forward-looking camera, zero pitch: camera z -> body x, x -> -y, y -> -z."""
        r = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
        return cls(r, np.asarray(translation, dtype=float))

    def inverse_apply(self, points_b: np.ndarray) -> np.ndarray:
        return (np.asarray(points_b, dtype=float) - self.translation) @ self.rotation


DEFAULT_EXTRINSICS = Extrinsics.forward_camera()


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise ContractError(f"invalid position {self.position!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def altitude(self) -> float:
        return self.position[2]

    def as_array(self) -> np.ndarray:
        return np.array(self.position, dtype=float)

    def body_to_world(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    frame: str = CAMERA
    # flat pixel index (v * width + u) each point came from; -1 when unknown
    pixels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ContractError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.pixels is not None:
            object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=np.int64).reshape(-1))

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, mask: np.ndarray) -> "PointCloud":
        pix = None if self.pixels is None else self.pixels[mask]
        return PointCloud(self.points[mask], self.frame, pix)


def back_project(depth: np.ndarray, k: CameraIntrinsics) -> PointCloud:
    """Lift every valid depth pixel into a camera-frame point.

    ``depth`` holds z-depth along the optical axis; zero or beyond-range pixels
    are dropped.
    """
    depth = np.asarray(depth, dtype=float)
    if depth.shape != k.shape:
        raise ConfigError(f"depth shape {depth.shape} does not match intrinsics {k.shape}")
    valid = (depth > 0.0) & (depth <= k.max_range)
    v, u = np.nonzero(valid)
    z = depth[v, u]
    pts = np.stack([z * (u - k.cu) / k.fx, z * (v - k.cv) / k.fy, z], axis=1)
    return PointCloud(pts, CAMERA, v * k.width + u)


def to_body(cloud: PointCloud, t: Extrinsics) -> PointCloud:
    if cloud.frame != CAMERA:
        raise ContractError(f"to_body expects a camera-frame cloud, got {cloud.frame!r}")
    pts = cloud.points @ t.rotation.T + t.translation
    return PointCloud(pts, BODY, cloud.pixels)


def exclude_ground(cloud: PointCloud, height_above_floor: float, ground_eps: float = 0.1) -> PointCloud:
    """Drop body-frame points lying within ``ground_eps`` of the floor plane."""
    if cloud.frame != BODY:
        raise ContractError("ground exclusion needs a body-frame cloud")
    keep = cloud.points[:, 2] + height_above_floor > ground_eps
    return cloud.subset(keep)


def slice_by_height(cloud: PointCloud, half_height_d: float = 0.1) -> PointCloud:
    if cloud.frame != BODY:
        raise ContractError("slice_by_height expects a body-frame cloud")
    keep = np.abs(cloud.points[:, 2]) <= half_height_d
    return cloud.subset(keep)
