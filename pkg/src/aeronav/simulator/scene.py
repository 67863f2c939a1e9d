"""Voxel world representation and its JSON file format."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import ConfigError

SCENE_FORMAT = "aeronav-scene"
SCENE_VERSION = 1


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    label: str
    aabb_min: tuple[float, float, float]
    aabb_max: tuple[float, float, float]
    is_target_candidate: bool = True

    def __post_init__(self):
        lo = tuple(float(c) for c in self.aabb_min)
        hi = tuple(float(c) for c in self.aabb_max)
        if not self.label:
            raise ConfigError("object label must be nonempty")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ConfigError(f"degenerate aabb for object {self.id}: {lo} {hi}")
        object.__setattr__(self, "aabb_min", lo)
        object.__setattr__(self, "aabb_max", hi)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.aabb_min) + np.array(self.aabb_max)) / 2.0

    def distance_to(self, p) -> float:
        """Euclidean distance from point ``p`` to the closest point of the box."""
        p = np.asarray(p, dtype=float)
        lo, hi = np.array(self.aabb_min), np.array(self.aabb_max)
        d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
        return float(math.sqrt(float(d @ d)))

    def corners(self) -> np.ndarray:
        lo, hi = self.aabb_min, self.aabb_max
        return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])

    def to_dict(self) -> dict:
        return {"id": self.id, "label": self.label, "aabb_min": list(self.aabb_min),
                "aabb_max": list(self.aabb_max), "is_target_candidate": self.is_target_candidate}


@dataclass(eq=False)
class VoxelScene:
    """Closed voxel world. Cell (i, j, k) spans [i*res, (i+1)*res) on each axis.

    The k = 0 layer is the floor slab and the top layer is the ceiling slab, so
    ``floor_z = res`` and ``ceiling_z = (nz - 1) * res``.
    """

    resolution: float
    occupancy: np.ndarray
    objects: list[ObjectInstance]
    taxonomy: dict[str, str | None]
    seed: int = 0
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    start_yaw: float = 0.0
    rooms: list[tuple[int, int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupancy, dtype=bool)
        if occ.ndim != 3:
            raise ConfigError("occupancy must be a 3-D grid")
        occ.setflags(write=False)
        self.occupancy = occ
        self.start = tuple(float(c) for c in self.start)
        for o in self.objects:
            if o.label not in self.taxonomy:
                raise ConfigError(f"object class {o.label!r} missing from taxonomy")

    # -- basic geometry -------------------------------------------------
    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.occupancy.shape)

    @property
    def floor_z(self) -> float:
        return self.resolution

    @property
    def ceiling_z(self) -> float:
        return (self.dims[2] - 1) * self.resolution

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.dims, dtype=float) * self.resolution

    def cell_of(self, p) -> tuple[int, int, int]:
        return tuple(int(math.floor(c / self.resolution)) for c in p)

    def cell_center(self, idx) -> np.ndarray:
        return (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def in_bounds(self, idx) -> bool:
        return all(0 <= i < n for i, n in zip(idx, self.dims))

    def is_free_cell(self, idx) -> bool:
        return self.in_bounds(idx) and not self.occupancy[tuple(idx)]

    # -- classes --------------------------------------------------------
    @cached_property
    def class_names(self) -> list[str]:
        return sorted(self.taxonomy)

    def class_id(self, label: str) -> int:
        """1-based class id used in class frames (0 is plain structure)."""
        try:
            return self.class_names.index(label) + 1
        except ValueError:
            raise ConfigError(f"unknown class {label!r}") from None

    def parent_of(self, label: str) -> str | None:
        if label not in self.taxonomy:
            raise ConfigError(f"unknown class {label!r}")
        return self.taxonomy[label]

    def instances_of(self, label: str) -> list[ObjectInstance]:
        return [o for o in self.objects if o.label == label]

    @cached_property
    def instance_grid(self) -> np.ndarray:
        """Per-cell object index + 1 (0 for structure or empty). Later objects win."""
        grid = np.zeros(self.dims, dtype=np.int32)
        for n, o in enumerate(self.objects):
            sl = self._cell_slices(o)
            grid[sl] = n + 1
        grid.setflags(write=False)
        return grid

    @cached_property
    def instance_class_ids(self) -> np.ndarray:
        """Lookup table: instance grid value -> class id."""
        ids = [0] + [self.class_id(o.label) for o in self.objects]
        return np.array(ids, dtype=np.int32)

    def _cell_slices(self, o: ObjectInstance):
        # cells whose centres lie inside the box
        lo = np.ceil(np.array(o.aabb_min) / self.resolution - 0.5).astype(int)
        hi = np.floor(np.array(o.aabb_max) / self.resolution - 0.5).astype(int)
        lo = np.clip(lo, 0, np.array(self.dims) - 1)
        hi = np.clip(hi, 0, np.array(self.dims) - 1)
        return tuple(slice(a, b + 1) for a, b in zip(lo, hi))

    def object_cells(self, o: ObjectInstance) -> tuple[slice, ...]:
        return self._cell_slices(o)

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": SCENE_FORMAT,
            "version": SCENE_VERSION,
            "resolution": self.resolution,
            "dims": list(self.dims),
            "occupancy_rle": rle_encode(self.occupancy.ravel()),
            "objects": [o.to_dict() for o in self.objects],
            "taxonomy": {k: self.taxonomy[k] for k in sorted(self.taxonomy)},
            "seed": self.seed,
            "start": list(self.start),
            "start_yaw": self.start_yaw,
            "rooms": [list(r) for r in self.rooms],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelScene":
        if d.get("format") != SCENE_FORMAT:
            raise ConfigError("not a scene file")
        if d.get("version") != SCENE_VERSION:
            raise ConfigError(f"unsupported scene version {d.get('version')}")
        dims = tuple(d["dims"])
        flat = rle_decode(d["occupancy_rle"], int(np.prod(dims)))
        objects = [ObjectInstance(o["id"], o["label"], tuple(o["aabb_min"]), tuple(o["aabb_max"]),
                                  bool(o["is_target_candidate"])) for o in d["objects"]]
        return cls(resolution=d["resolution"], occupancy=flat.reshape(dims), objects=objects,
                   taxonomy=dict(d["taxonomy"]), seed=d["seed"], start=tuple(d["start"]),
                   start_yaw=d["start_yaw"], rooms=[tuple(r) for r in d.get("rooms", [])])

    @classmethod
    def loads(cls, text: str) -> "VoxelScene":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "VoxelScene":
        try:
            return cls.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read scene {path}: {exc}") from exc


def rle_encode(flat: np.ndarray) -> list[list[int]]:
    flat = np.asarray(flat).astype(np.uint8)
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [flat.size]]))
    return [[int(flat[s]), int(n)] for s, n in zip(starts, lengths)]


def rle_decode(runs, size: int) -> np.ndarray:
    out = np.concatenate([np.full(n, v, dtype=bool) for v, n in runs]) if runs else np.zeros(0, bool)
    if out.size != size:
        raise ConfigError(f"occupancy run lengths sum to {out.size}, expected {size}")
    return out
