"""Regenerate the render-debug golden files from the test oracles.

Run from the repository root: python tests/make_goldens.py
The scene comes from the simulator; every perception artifact is computed by
the brute-force oracles and encoded here without the package's writers.
"""

import math
from pathlib import Path

import numpy as np

from aeronav.evaluation.env import PerceptionConfig, embedder_for
from aeronav.geometry import DEFAULT_INTRINSICS, Pose
from aeronav.simulator import render
from conftest import box_room
from oracles import roi_oracle, scan_oracle

GOLDEN = Path(__file__).parent / "goldens"
POSE = (0.62, 0.71, 0.58, 0.35)
TARGET = "Mug"


def golden_scene():
    return box_room(20, 14, 8, objects=[("Mug", (12, 6, 2), (14, 8, 4)), ("Vase", (6, 10, 1), (8, 12, 5))],
                    blocks=[((9, 2, 1), (10, 5, 6))], start=POSE[:3], yaw=POSE[3])


def _pgm(img):
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + bytes(int(x) for x in img.ravel())


def _depth_pgm(depth, max_range):
    h, w = depth.shape
    body = bytes(min(255, max(0, round(float(z) / max_range * 255.0))) for z in depth.ravel())
    return f"P5\n# depth 255={max_range:g}m\n{w} {h}\n255\n".encode() + body


def _semantic(scene, classes, pc):
    emb = embedder_for(scene, pc)
    text = emb.text_embed(TARGET)
    rows, cols = pc.patch_grid
    h, w = classes.shape
    rb = [i * h // rows for i in range(rows + 1)]
    cb = [j * w // cols for j in range(cols + 1)]
    lines = []
    for i in range(rows):
        vals = []
        for j in range(cols):
            patch = classes[rb[i]:rb[i + 1], cb[j]:cb[j + 1]].ravel()
            vec = sum(emb.table[c] for c in patch) / len(patch)
            nv, nt = math.sqrt(float(vec @ vec)), math.sqrt(float(text @ text))
            s = float(vec @ text) / (nv * nt) if nv * nt > 0 else 0.0
            vals.append(f"{min(max(s, -1.0), 1.0):.12f}")
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def build():
    k = DEFAULT_INTRINSICS
    pc = PerceptionConfig()
    scene = golden_scene()
    pose = Pose(POSE[:3], POSE[3])
    depth, classes = render(scene, pose, k)
    h = pose.altitude - scene.floor_z
    rho = scan_oracle(depth, k, pc.half_height_d, pc.n_sectors, h, pc.ground_eps)
    *_, mask = roi_oracle(depth, k, pc.percentile_q, h, pc.ground_eps, with_mask=True)
    return {
        "scene.json": scene.dumps().encode(),
        "scan.csv": ("sector,rho\n" + "".join(f"{i},{r:.12f}\n" for i, r in enumerate(rho))).encode(),
        "roi.pgm": _pgm(np.where(mask, 255, 0)),
        "semantic.csv": _semantic(scene, classes, pc).encode(),
        "depth.pgm": _depth_pgm(depth, k.max_range),
    }


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for name, data in build().items():
        (GOLDEN / name).write_bytes(data)
        print("wrote", GOLDEN / name)
