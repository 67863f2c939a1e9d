"""Deterministic debug artifacts: PGM/PPM images and CSV tables."""

from __future__ import annotations

import csv
import io

import numpy as np

from ..perception import RoiFeature, ScanFeature, SemanticMap
from ..simulator.scene import VoxelScene

TOPDOWN_SCALE = 4


def pgm_bytes(img: np.ndarray, comment: str | None = None) -> bytes:
    """Binary 8-bit PGM (P5)."""
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    head = "P5\n" + (f"# {comment}\n" if comment else "") + f"{w} {h}\n255\n"
    return head.encode("ascii") + img.tobytes()


def ppm_bytes(img: np.ndarray) -> bytes:
    """Binary 8-bit PPM (P6) from an (H, W, 3) array."""
    img = np.asarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_pnm(data: bytes) -> np.ndarray:
    """Parse the P5/P6 files written above (comments allowed)."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    magic, w, h = tokens[0], int(tokens[1]), int(tokens[2])
    body = np.frombuffer(data[pos + 1:], dtype=np.uint8)
    if magic == b"P5":
        return body.reshape(h, w)
    return body.reshape(h, w, 3)


def depth_pgm(depth: np.ndarray, max_range: float) -> bytes:
    """Depth scaled so that 255 is ``max_range``; invalid (0) pixels stay 0."""
    scaled = np.clip(np.rint(np.asarray(depth) / max_range * 255.0), 0, 255)
    return pgm_bytes(scaled, comment=f"depth 255={max_range:g}m")


def roi_pgm(roi: RoiFeature, shape: tuple[int, int]) -> bytes:
    mask = np.zeros(shape, dtype=np.uint8) if roi.mask is None else np.asarray(roi.mask, dtype=bool)
    return pgm_bytes(np.where(mask, 255, 0))


def scan_csv(scan: ScanFeature) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sector", "rho"])
    for i, r in enumerate(scan.rho_min):
        w.writerow([i, f"{float(r):.12f}"])
    return buf.getvalue()


def semantic_csv(sem: SemanticMap) -> str:
    rows, cols = sem.grid
    grid = np.asarray(sem.s).reshape(rows, cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in grid:
        w.writerow([f"{float(v):.12f}" for v in row])
    return buf.getvalue()


def topdown_image(scene: VoxelScene, path_xy: list[tuple[float, float]] | None = None,
                  scale: int = TOPDOWN_SCALE) -> np.ndarray:
    """Top-down RGB map, +x to the right and +y up.

    Walls and furniture (anything occupied between floor slab and ceiling)
    are grey, target objects orange, the path red with a green start and a
    blue end marker.
    """
    occ = np.asarray(scene.occupancy)[:, :, 1:-1].any(axis=2)
    nx, ny = occ.shape
    img = np.full((ny, nx, 3), 255, dtype=np.uint8)
    img[occ.T] = (110, 110, 110)
    for o in scene.objects:
        if not o.is_target_candidate:
            continue
        lo = np.floor(np.asarray(o.aabb_min[:2]) / scene.resolution + 1e-9).astype(int)
        hi = np.ceil(np.asarray(o.aabb_max[:2]) / scene.resolution - 1e-9).astype(int)
        img[lo[1]:hi[1], lo[0]:hi[0]] = (240, 140, 20)
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    if path_xy:
        pts = [(int(x / scene.resolution * scale), int(y / scene.resolution * scale)) for x, y in path_xy]
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            n = max(abs(x1 - x0), abs(y1 - y0), 1)
            for t in range(n + 1):
                _dot(img, x0 + (x1 - x0) * t // n, y0 + (y1 - y0) * t // n, (220, 30, 30), 0)
        _dot(img, *pts[0], (30, 170, 30), 2)
        _dot(img, *pts[-1], (30, 60, 220), 2)
    return img[::-1]  # row 0 at the top of the image is the largest y


def _dot(img: np.ndarray, x: int, y: int, color, r: int) -> None:
    h, w, _ = img.shape
    img[max(y - r, 0):min(y + r + 1, h), max(x - r, 0):min(x + r + 1, w)] = color
