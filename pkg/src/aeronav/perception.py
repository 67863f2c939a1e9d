"""Frames -> policy observation.

Builds the polar obstacle scan and the far-depth region of interest from the
depth frame, the patch/text similarity map from the class frame, and the
bounding-box geometry feature from a detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .geometry import (
    DEFAULT_EXTRINSICS,
    CameraIntrinsics,
    Extrinsics,
    PointCloud,
    back_project,
    exclude_ground,
    slice_by_height,
    to_body,
)
from .simulator.sensors import Detection

DEFAULT_SECTORS = 16
DEFAULT_PATCH_GRID = (7, 7)
GROUND_EPS = 0.1


@dataclass(frozen=True)
class ScanFeature:
    rho_min: np.ndarray  # left -> right

    @property
    def n(self) -> int:
        return len(self.rho_min)

    @property
    def closest(self) -> float:
        return float(self.rho_min.min())


@dataclass(frozen=True)
class RoiFeature:
    dx: float = 0.0
    dy: float = 0.0
    z_mean: float = 0.0
    valid: bool = False
    bbox: tuple[int, int, int, int] = (0, 0, 0, 0)  # u_min, v_min, u_max, v_max (exclusive)
    mask: np.ndarray | None = None

    @property
    def offset(self) -> float:
        """Weighted centroid offset; vertical error counts double."""
        return math.sqrt(self.dx ** 2 + (2.0 * self.dy) ** 2)


@dataclass(frozen=True)
class SemanticMap:
    s: np.ndarray
    grid: tuple[int, int] = DEFAULT_PATCH_GRID


@dataclass(frozen=True)
class BBoxFeature:
    cx: float = 0.0
    cy: float = 0.0
    w: float = 0.0
    h: float = 0.0
    area_ratio: float = 0.0
    altitude: float = 0.0
    present: bool = False

    def as_tuple(self):
        return (self.cx, self.cy, self.w, self.h, self.area_ratio)


# -- depth -> scan -------------------------------------------------------------

def _body_cloud(depth, k, extrinsics, height_above_floor, ground_eps) -> PointCloud:
    cloud = to_body(back_project(depth, k), extrinsics)
    if height_above_floor is not None:
        cloud = exclude_ground(cloud, height_above_floor, ground_eps)
    return cloud


def sector_index(phi: np.ndarray, half_fov: float, n: int) -> np.ndarray:
    """Sector of each azimuth, 0 = leftmost; -1 outside [-half_fov, half_fov]."""
    width = 2.0 * half_fov / n
    k = np.floor((phi + half_fov) / width).astype(np.int64)
    k = np.where(phi == half_fov, n - 1, k)
    inside = (phi >= -half_fov) & (phi <= half_fov)
    k = np.clip(k, 0, n - 1)
    return np.where(inside, n - 1 - k, -1)


def scan_from_cloud(cloud: PointCloud, half_fov: float, max_range: float, n: int) -> ScanFeature:
    rho_min = np.ones(n)
    if len(cloud):
        x, y = cloud.points[:, 0], cloud.points[:, 1]
        rho = np.minimum(np.hypot(x, y), max_range) / max_range
        idx = sector_index(np.arctan2(y, x), half_fov, n)
        ok = idx >= 0
        np.minimum.at(rho_min, idx[ok], rho[ok])
    return ScanFeature(rho_min)


def depth_to_scan(depth, k: CameraIntrinsics, extrinsics: Extrinsics = DEFAULT_EXTRINSICS,
                  half_height_d: float = 0.1, n: int = DEFAULT_SECTORS,
                  height_above_floor: float | None = None, ground_eps: float = GROUND_EPS) -> ScanFeature:
    """Closest normalized obstacle distance per azimuth sector of the horizontal slice.

    Sectors with no points read 1.0.
    """
    if n < 1:
        raise ConfigError("sector count must be >= 1")
    cloud = _body_cloud(depth, k, extrinsics, height_above_floor, ground_eps)
    cloud = slice_by_height(cloud, half_height_d)
    return scan_from_cloud(cloud, k.hfov / 2.0, k.max_range, n)


# -- depth -> ROI ----------------------------------------------------------------

def body_depth_image(depth, k: CameraIntrinsics, extrinsics: Extrinsics = DEFAULT_EXTRINSICS,
                     height_above_floor: float | None = None, ground_eps: float = GROUND_EPS) -> np.ndarray:
    """Ground-filtered body cloud reprojected into the image (z-buffered, 0 = empty)."""
    cloud = _body_cloud(depth, k, extrinsics, height_above_floor, ground_eps)
    out = np.zeros(k.shape)
    if not len(cloud):
        return out
    pc = extrinsics.inverse_apply(cloud.points)
    front = pc[:, 2] > 0
    pc = pc[front]
    uv = np.rint(k.project(pc)).astype(np.int64)
    inside = (uv[:, 0] >= 0) & (uv[:, 0] < k.width) & (uv[:, 1] >= 0) & (uv[:, 1] < k.height)
    uv, z = uv[inside], pc[inside, 2]
    flat = np.full(k.width * k.height, np.inf)
    np.minimum.at(flat, uv[:, 1] * k.width + uv[:, 0], z)
    flat[np.isinf(flat)] = 0.0
    return flat.reshape(k.shape)


def extract_roi(depth, k: CameraIntrinsics, extrinsics: Extrinsics = DEFAULT_EXTRINSICS,
                percentile_q: float = 0.10, height_above_floor: float | None = None,
                ground_eps: float = GROUND_EPS) -> RoiFeature:
    """Largest 4-connected region among the farthest ``percentile_q`` of valid depths."""
    if not 0.0 < percentile_q < 1.0:
        raise ConfigError("percentile_q must lie in (0, 1)")
    img = body_depth_image(depth, k, extrinsics, height_above_floor, ground_eps)
    valid = img > 0
    if not valid.any():
        return RoiFeature()
    thr = np.quantile(img[valid], 1.0 - percentile_q)
    far = valid & (img >= thr)
    labels, count = ndimage.label(far)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    areas[0] = 0
    best = int(np.argmax(areas))  # first max == smallest raster-order label
    comp = labels == best
    vs, us = np.nonzero(comp)
    u0, u1, v0, v1 = int(us.min()), int(us.max()) + 1, int(vs.min()), int(vs.max()) + 1
    half_w, half_h = k.width / 2.0, k.height / 2.0
    dx = ((u0 + u1) / 2.0 - half_w) / half_w
    dy = ((v0 + v1) / 2.0 - half_h) / half_h
    return RoiFeature(dx, dy, float(img[comp].mean()), True, (u0, v0, u1, v1), comp)


# -- semantics --------------------------------------------------------------------

class EmbeddingProvider(Protocol):
    dim: int

    def text_embed(self, label: str) -> np.ndarray: ...

    def patch_embed(self, patch: np.ndarray) -> np.ndarray: ...


class SyntheticEmbedder:
    """Seeded stand-in for an image/text encoder pair working on class-id frames.

    Each class gets a fixed isotropic unit vector, optionally mixed with related
    classes (by default each class with its parent) before renormalizing. A
    patch embeds to the pixel-count weighted mean of its class vectors, with
    background pixels contributing a fixed vector scaled by
    ``background_scale``.
    """

    def __init__(self, class_names, dim: int = 32, seed: int = 0,
                 relatedness: dict[tuple[str, str], float] | None = None,
                 taxonomy: dict[str, str | None] | None = None, parent_mix: float = 0.5,
                 background_scale: float = 0.1):
        self.class_names = list(class_names)
        self.dim = dim
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((len(self.class_names) + 1, dim))
        rel = dict(relatedness or {})
        if taxonomy:
            for child, parent in taxonomy.items():
                if parent is not None:
                    rel.setdefault((child, parent), parent_mix)
        index = {c: i + 1 for i, c in enumerate(self.class_names)}
        mixed = raw.copy()
        for (a, b), w in sorted(rel.items()):
            if a in index and b in index:
                mixed[index[a]] += w * raw[index[b]]
        table = mixed / np.linalg.norm(mixed, axis=1, keepdims=True)
        table[0] *= background_scale
        self._index = index
        self.table = table

    def class_index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ConfigError(f"embedder has no class {label!r}") from None

    def text_embed(self, label: str) -> np.ndarray:
        return self.table[self.class_index(label)].copy()

    def patch_embed(self, patch: np.ndarray) -> np.ndarray:
        counts = np.bincount(np.asarray(patch).ravel(), minlength=len(self.table))
        return counts @ self.table / max(counts.sum(), 1)

    def patch_embed_many(self, class_frame: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
        ids = patch_ids(class_frame.shape, grid)
        n = len(self.table)
        counts = np.zeros((grid[0] * grid[1], n))
        np.add.at(counts, (ids.ravel(), class_frame.ravel()), 1.0)
        return counts @ self.table / counts.sum(axis=1, keepdims=True)


def patch_bounds(size: int, parts: int) -> np.ndarray:
    """Integer patch edges tiling ``size`` pixels into ``parts`` near-equal strips."""
    if parts < 1 or parts > size:
        raise ConfigError(f"cannot split {size} pixels into {parts} patches")
    return (np.arange(parts + 1) * size) // parts


def patch_ids(shape, grid) -> np.ndarray:
    rows, cols = grid
    rb, cb = patch_bounds(shape[0], rows), patch_bounds(shape[1], cols)
    r = np.searchsorted(rb, np.arange(shape[0]), side="right") - 1
    c = np.searchsorted(cb, np.arange(shape[1]), side="right") - 1
    return r[:, None] * cols + c[None, :]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_map(class_frame: np.ndarray, provider: EmbeddingProvider, target_class: str,
                   patch_grid: tuple[int, int] = DEFAULT_PATCH_GRID) -> SemanticMap:
    """Cosine similarity between each image patch embedding and the target text embedding."""
    class_frame = np.asarray(class_frame)
    v_c = provider.text_embed(target_class)
    if hasattr(provider, "patch_embed_many"):
        emb = provider.patch_embed_many(class_frame, patch_grid)
    else:
        rb = patch_bounds(class_frame.shape[0], patch_grid[0])
        cb = patch_bounds(class_frame.shape[1], patch_grid[1])
        emb = np.array([provider.patch_embed(class_frame[rb[i]:rb[i + 1], cb[j]:cb[j + 1]])
                        for i in range(patch_grid[0]) for j in range(patch_grid[1])])
    norms = np.linalg.norm(emb, axis=1) * np.linalg.norm(v_c)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(norms > 0, emb @ v_c / norms, 0.0)
    return SemanticMap(np.clip(s, -1.0, 1.0), tuple(patch_grid))


# -- detection geometry --------------------------------------------------------------

def bbox_feature(detection: Detection, k: CameraIntrinsics, altitude: float) -> BBoxFeature:
    if not detection.present:
        return BBoxFeature()
    u0, v0, u1, v1 = detection.bbox
    w, h = (u1 - u0) / k.width, (v1 - v0) / k.height
    return BBoxFeature((u0 + u1) / 2.0 / k.width, (v0 + v1) / 2.0 / k.height, w, h,
                       min(detection.area / (k.width * k.height), 1.0), float(altitude), True)


# -- fused observation ---------------------------------------------------------------

@dataclass(frozen=True)
class FeatureBundle:
    scan: ScanFeature
    roi: RoiFeature
    semantic: SemanticMap
    bbox: BBoxFeature
    altitude: float
    ceiling: float = 1.65
    max_range: float = 3.0

    def to_vector(self) -> np.ndarray:
        """[scan | semantic | dx, dy, z/max_range | cx, cy, w, h, area, present | altitude/ceiling]."""
        roi = [self.roi.dx, self.roi.dy, self.roi.z_mean / self.max_range]
        bb = [*self.bbox.as_tuple(), 1.0 if self.bbox.present else 0.0]
        return np.concatenate([self.scan.rho_min, self.semantic.s, roi, bb,
                               [self.altitude / self.ceiling]]).astype(float)

    @property
    def size(self) -> int:
        return self.scan.n + len(self.semantic.s) + 3 + 6 + 1

    @classmethod
    def from_vector(cls, vec, n_sectors: int = DEFAULT_SECTORS,
                    patch_grid: tuple[int, int] = DEFAULT_PATCH_GRID,
                    ceiling: float = 1.65, max_range: float = 3.0) -> "FeatureBundle":
        vec = np.asarray(vec, dtype=float)
        n_p = patch_grid[0] * patch_grid[1]
        if vec.shape != (n_sectors + n_p + 10,):
            raise ConfigError(f"bundle vector has shape {vec.shape}")
        i = 0
        scan = ScanFeature(vec[i:i + n_sectors].copy()); i += n_sectors
        sem = SemanticMap(vec[i:i + n_p].copy(), tuple(patch_grid)); i += n_p
        dx, dy, zn = vec[i:i + 3]; i += 3
        z_mean = zn * max_range
        roi = RoiFeature(float(dx), float(dy), float(z_mean), bool(z_mean > 0))
        cx, cy, w, h, area, present = vec[i:i + 6]; i += 6
        altitude = float(vec[i] * ceiling)
        bbox = BBoxFeature(float(cx), float(cy), float(w), float(h), float(area),
                           altitude if present else 0.0, bool(present))
        return cls(scan, roi, sem, bbox, altitude, ceiling, max_range)


def assemble_bundle(scan: ScanFeature, roi: RoiFeature, semantic: SemanticMap, bbox: BBoxFeature,
                    altitude: float, ceiling: float = 1.65, max_range: float = 3.0) -> FeatureBundle:
    return FeatureBundle(scan, roi, semantic, bbox, float(altitude), float(ceiling), float(max_range))


def zero_bundle(n_sectors: int = DEFAULT_SECTORS, patch_grid=DEFAULT_PATCH_GRID, ceiling: float = 1.65,
                max_range: float = 3.0) -> FeatureBundle:
    return FeatureBundle(ScanFeature(np.zeros(n_sectors)), RoiFeature(),
                         SemanticMap(np.zeros(patch_grid[0] * patch_grid[1]), tuple(patch_grid)),
                         BBoxFeature(), 0.0, ceiling, max_range)
