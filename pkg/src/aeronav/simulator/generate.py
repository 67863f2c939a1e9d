"""Procedural multi-room voxel scenes.

Layout: the interior is split by binary space partitioning into rooms; every
split wall gets a door gap, so the room graph is a tree and all rooms are
connected. Furniture (parent classes) stands against walls, small target
objects sit on their parent furniture, on the floor, or on a wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ConfigError, GenerationError
from .raycast import bfs_distances
from .scene import ObjectInstance, VoxelScene

# footprint (x, y) and height in cells
FURNITURE = {
    "Table": (5, 4, 5),
    "Counter": (6, 3, 6),
    "Shelf": (3, 6, 8),
    "Bed": (8, 6, 3),
    "Sofa": (6, 3, 3),
    "Desk": (5, 3, 5),
}

# class -> (parent, placement, size cells)
TARGETS = {
    "Spatula": ("Counter", "on", (2, 2, 1)),
    "Bread": ("Counter", "on", (2, 2, 2)),
    "Mug": ("Counter", "on", (2, 2, 2)),
    "CoffeeMachine": ("Counter", "on", (2, 2, 3)),
    "Apple": ("Counter", "on", (2, 2, 2)),
    "Toaster": ("Counter", "on", (3, 2, 2)),
    "Painting": (None, "wall", (1, 4, 3)),
    "Vase": ("Shelf", "on", (2, 2, 3)),
    "RemoteControl": ("Sofa", "on", (2, 2, 1)),
    "ArmChair": (None, "floor", (4, 4, 3)),
    "Television": ("Table", "on", (2, 4, 3)),
    "Laptop": ("Table", "on", (3, 2, 2)),
    "Blinds": (None, "wall", (1, 4, 4)),
    "DeskLamp": ("Desk", "on", (2, 2, 3)),
    "Book": ("Shelf", "on", (2, 2, 2)),
    "AlarmClock": ("Desk", "on", (2, 2, 2)),
    "Pillow": ("Bed", "on", (3, 2, 2)),
    "SoapBar": ("Counter", "on", (2, 2, 1)),
    "Towel": (None, "wall", (1, 3, 3)),
    "SprayBottle": ("Counter", "on", (2, 2, 2)),
    "Mirror": (None, "wall", (1, 4, 4)),
    "ToiletPaper": (None, "wall", (1, 2, 2)),
    "Plant": (None, "floor", (2, 2, 4)),
}

DEFAULT_TAXONOMY: dict[str, str | None] = {name: None for name in FURNITURE}
DEFAULT_TAXONOMY.update({name: spec[0] for name, spec in TARGETS.items()})


@dataclass(frozen=True)
class SceneConfig:
    rooms: int = 3
    dims: tuple[int, int, int] = (48, 32, 12)
    object_density: float = 0.15
    class_pool: tuple[str, ...] = ("Mug", "Laptop", "Vase", "Plant", "Painting", "Pillow")
    targets_per_room: int = 2
    resolution: float = 0.15
    door_width: int = 6
    min_room: int = 9
    start_altitude: float = 0.6
    max_attempts: int = 20

    def __post_init__(self):
        if any(d < m for d, m in zip(self.dims, (8, 8, 6))):
            raise ConfigError(f"dims {self.dims} below the 8x8x6 minimum")
        if not self.class_pool:
            raise ConfigError("class_pool must be nonempty")
        unknown = [c for c in self.class_pool if c not in TARGETS]
        if unknown:
            raise ConfigError(f"unknown target classes {unknown}")
        if self.rooms < 1:
            raise ConfigError("rooms must be >= 1")
        if not 0.0 <= self.object_density <= 1.0:
            raise ConfigError("object_density must lie in [0, 1]")


@dataclass
class _Room:
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass
class _Layout:
    occ: np.ndarray
    rooms: list[_Room]
    doors: list[tuple[int, int, int, int]] = field(default_factory=list)  # axis, wall, lo, hi(excl)
    reserved: np.ndarray | None = None  # 2-D mask of cells kept clear of objects


def _split_layout(cfg: SceneConfig, rng: np.random.Generator) -> _Layout:
    nx, ny, nz = cfg.dims
    occ = np.zeros(cfg.dims, dtype=bool)
    occ[0, :, :] = occ[-1, :, :] = True
    occ[:, 0, :] = occ[:, -1, :] = True
    occ[:, :, 0] = occ[:, :, -1] = True
    layout = _Layout(occ, [_Room(1, 1, nx - 1, ny - 1)])
    door_top = max(2, int(round(1 + 0.8 * (nz - 2))))
    while len(layout.rooms) < cfg.rooms:
        candidates = sorted(range(len(layout.rooms)), key=lambda i: -layout.rooms[i].area)
        for idx in candidates:
            room = layout.rooms[idx]
            if _try_split(cfg, rng, layout, idx, room, door_top):
                break
        else:
            raise GenerationError(
                f"cannot fit {cfg.rooms} rooms of min size {cfg.min_room} in dims {cfg.dims}")
    reserved = np.zeros(cfg.dims[:2], dtype=bool)
    for axis, w, lo, hi in layout.doors:
        if axis == 0:
            reserved[max(w - 3, 0):w + 4, lo - 1:hi + 1] = True
        else:
            reserved[lo - 1:hi + 1, max(w - 3, 0):w + 4] = True
    layout.reserved = reserved
    return layout


def _try_split(cfg, rng, layout: _Layout, idx: int, room: _Room, door_top: int) -> bool:
    w_x, w_y = room.x1 - room.x0, room.y1 - room.y0
    axis = 0 if w_x >= w_y else 1
    span = w_x if axis == 0 else w_y
    if span < 2 * cfg.min_room + 1:
        return False
    base = room.x0 if axis == 0 else room.y0
    positions = list(range(base + cfg.min_room, base + span - cfg.min_room))
    # avoid abutting existing door gaps
    bad = set()
    for d_axis, d_w, d_lo, d_hi in layout.doors:
        if d_axis != axis:
            bad.update(range(d_lo - 2, d_hi + 2))
    positions = [p for p in positions if p not in bad]
    other_lo, other_hi = (room.y0, room.y1) if axis == 0 else (room.x0, room.x1)
    if not positions or other_hi - other_lo < cfg.door_width + 2:
        return False
    wall = int(rng.choice(positions))
    door_lo = int(rng.integers(other_lo + 1, other_hi - cfg.door_width))
    door_hi = door_lo + cfg.door_width
    occ = layout.occ
    if axis == 0:
        occ[wall, other_lo:other_hi, 1:-1] = True
        occ[wall, door_lo:door_hi, 1:door_top] = False
        a, b = _Room(room.x0, room.y0, wall, room.y1), _Room(wall + 1, room.y0, room.x1, room.y1)
    else:
        occ[other_lo:other_hi, wall, 1:-1] = True
        occ[door_lo:door_hi, wall, 1:door_top] = False
        a, b = _Room(room.x0, room.y0, room.x1, wall), _Room(room.x0, wall + 1, room.x1, room.y1)
    layout.doors.append((axis, wall, door_lo, door_hi))
    layout.rooms[idx:idx + 1] = [a, b]
    return True


def _box_free(occ, taken, lo, hi) -> bool:
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    if any(a < 0 or b > n for a, b, n in zip(lo, hi, occ.shape)):
        return False
    return not occ[sl].any() and not taken[sl].any()


def _aabb(lo, hi, res):
    return tuple(float(c * res) for c in lo), tuple(float(c * res) for c in hi)


def _place_furniture(cfg, rng, layout, room: _Room, occ, taken, start_xy, objects, nz):
    area_m2 = room.area * cfg.resolution ** 2
    names = sorted(FURNITURE)
    mean_fp = np.mean([FURNITURE[n][0] * FURNITURE[n][1] for n in names]) * cfg.resolution ** 2
    count = int(round(cfg.object_density * area_m2 / mean_fp))
    placed = []
    for _ in range(count):
        ok = False
        for _attempt in range(60):
            name = names[int(rng.integers(len(names)))]
            sx, sy, sz = FURNITURE[name]
            if rng.random() < 0.5:
                sx, sy = sy, sx
            sz = min(sz, nz - 4)
            side = int(rng.integers(4))
            # push against one wall of the room
            if side == 0:
                x0, y0 = room.x0, int(rng.integers(room.y0, max(room.y0 + 1, room.y1 - sy + 1)))
            elif side == 1:
                x0, y0 = room.x1 - sx, int(rng.integers(room.y0, max(room.y0 + 1, room.y1 - sy + 1)))
            elif side == 2:
                x0, y0 = int(rng.integers(room.x0, max(room.x0 + 1, room.x1 - sx + 1))), room.y0
            else:
                x0, y0 = int(rng.integers(room.x0, max(room.x0 + 1, room.x1 - sx + 1))), room.y1 - sy
            lo, hi = (x0, y0, 1), (x0 + sx, y0 + sy, 1 + sz)
            if x0 < room.x0 or y0 < room.y0 or hi[0] > room.x1 or hi[1] > room.y1:
                continue
            if layout.reserved[x0:hi[0], y0:hi[1]].any() or start_xy[x0:hi[0], y0:hi[1]].any():
                continue
            # keep a one-cell gap to other objects
            glo = (max(x0 - 1, 0), max(y0 - 1, 0), 1)
            ghi = (hi[0] + 1, hi[1] + 1, hi[2])
            if taken[tuple(slice(a, b) for a, b in zip(glo, ghi))].any():
                continue
            if not _box_free(occ, taken, lo, hi):
                continue
            taken[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
            a_lo, a_hi = _aabb(lo, hi, cfg.resolution)
            objects.append(ObjectInstance(len(objects), name, a_lo, a_hi, False))
            placed.append((name, lo, hi))
            ok = True
            break
        if not ok:
            raise GenerationError(
                f"object_density {cfg.object_density} too high: placed {len(placed)}/{count} "
                f"furniture in a {room.x1 - room.x0}x{room.y1 - room.y0} room")
    return placed


def _place_target(cfg, rng, layout, room, occ, taken, start_xy, objects, furniture, nz, label) -> bool:
    parent, mode, (sx, sy, sz) = TARGETS[label]
    hosts = [f for f in furniture if f[0] == parent]
    if mode == "on" and not hosts:
        mode = "floor"
    for _attempt in range(80):
        if rng.random() < 0.5:
            sx, sy = sy, sx
        if mode == "on":
            _, flo, fhi = hosts[int(rng.integers(len(hosts)))]
            if fhi[0] - flo[0] < sx or fhi[1] - flo[1] < sy:
                continue
            x0 = int(rng.integers(flo[0], fhi[0] - sx + 1))
            y0 = int(rng.integers(flo[1], fhi[1] - sy + 1))
            z0 = fhi[2]
        elif mode == "floor":
            x0 = int(rng.integers(room.x0, max(room.x0 + 1, room.x1 - sx + 1)))
            y0 = int(rng.integers(room.y0, max(room.y0 + 1, room.y1 - sy + 1)))
            z0 = 1
        else:
            thin_x = sx <= sy
            side = int(rng.integers(2))
            if thin_x:
                x0 = room.x0 if side == 0 else room.x1 - sx
                y0 = int(rng.integers(room.y0, max(room.y0 + 1, room.y1 - sy + 1)))
            else:
                y0 = room.y0 if side == 0 else room.y1 - sy
                x0 = int(rng.integers(room.x0, max(room.x0 + 1, room.x1 - sx + 1)))
            z0 = int(rng.integers(3, max(4, nz - 2 - sz)))
        lo, hi = (x0, y0, z0), (x0 + sx, y0 + sy, z0 + sz)
        if hi[2] > nz - 3 or x0 < room.x0 or y0 < room.y0 or hi[0] > room.x1 or hi[1] > room.y1:
            continue
        if layout.reserved[x0:hi[0], y0:hi[1]].any() or start_xy[x0:hi[0], y0:hi[1]].any():
            continue
        if mode == "floor":
            glo = (max(x0 - 1, 0), max(y0 - 1, 0), 1)
            if taken[tuple(slice(a, b) for a, b in zip(glo, (hi[0] + 1, hi[1] + 1, hi[2])))].any():
                continue
        if not _box_free(occ, taken, lo, hi):
            continue
        taken[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
        a_lo, a_hi = _aabb(lo, hi, cfg.resolution)
        objects.append(ObjectInstance(len(objects), label, a_lo, a_hi, True))
        return True
    return False


def navigable_mask(occ: np.ndarray) -> np.ndarray:
    """Free cells whose face- and edge-neighbours are all free.

    A sphere of radius 0.12 m at the centre of such a cell clears all
    occupied cells when the resolution is 0.15 m.
    """
    struct = ndimage.generate_binary_structure(3, 2)
    return ~ndimage.binary_dilation(occ, structure=struct, border_value=1)


def generate_scene(seed: int, config: SceneConfig | None = None, placement: int = 0) -> VoxelScene:
    """Deterministic scene for ``seed``.

    ``placement`` keeps the room layout of ``seed`` and redraws furniture,
    targets and start yaw; placement 0 is the plain seeded scene.
    """
    cfg = config or SceneConfig()
    if placement < 0:
        raise ConfigError("placement must be >= 0")
    root = np.random.SeedSequence(int(seed))
    layout_seed, *object_seeds = root.spawn(1 + cfg.max_attempts)
    if placement:
        object_seeds = np.random.SeedSequence((int(seed), int(placement))).spawn(cfg.max_attempts)
    layout = _split_layout(cfg, np.random.default_rng(layout_seed))
    nx, ny, nz = cfg.dims
    res = cfg.resolution
    first = layout.rooms[0]
    sx = (first.x0 + first.x1) // 2
    sy = (first.y0 + first.y1) // 2
    sz = max(2, int(round((cfg.start_altitude + res) / res - 0.5)))
    sz = min(sz, nz - 3)
    start = ((sx + 0.5) * res, (sy + 0.5) * res, (sz + 0.5) * res)
    start_xy = np.zeros((nx, ny), dtype=bool)
    start_xy[max(sx - 4, 0):sx + 5, max(sy - 4, 0):sy + 5] = True

    last_problem = "no attempts"
    for attempt_seed in object_seeds:
        rng = np.random.default_rng(attempt_seed)
        occ = layout.occ.copy()
        taken = np.zeros(cfg.dims, dtype=bool)
        objects: list[ObjectInstance] = []
        furniture_by_room = []
        for room in layout.rooms:
            furniture_by_room.append(
                _place_furniture(cfg, rng, layout, room, occ, taken, start_xy, objects, nz))
        if cfg.object_density > 0:
            pool = list(cfg.class_pool)
            for room, furniture in zip(layout.rooms, furniture_by_room):
                for _ in range(cfg.targets_per_room):
                    label = pool[int(rng.integers(len(pool)))]
                    _place_target(cfg, rng, layout, room, occ, taken, start_xy, objects, furniture, nz, label)
        occ |= taken
        problem = _validate(occ, layout.rooms, start, res)
        wants_targets = cfg.object_density > 0 and cfg.targets_per_room > 0 and cfg.class_pool
        if problem is None and wants_targets and not any(o.is_target_candidate for o in objects):
            problem = "no target object could be placed"
        if problem is None:
            yaw = float(rng.integers(12)) * math.pi / 6.0 - math.pi
            taxonomy = dict(DEFAULT_TAXONOMY)
            return VoxelScene(resolution=res, occupancy=occ, objects=objects, taxonomy=taxonomy,
                              seed=int(seed), start=start, start_yaw=yaw,
                              rooms=[(r.x0, r.y0, r.x1, r.y1) for r in layout.rooms])
        last_problem = problem
    raise GenerationError(f"scene generation failed after {cfg.max_attempts} attempts: {last_problem}")


def _validate(occ, rooms, start, res) -> str | None:
    start_cell = np.array([int(math.floor(c / res)) for c in start])
    nav = navigable_mask(occ)
    if not nav[tuple(start_cell)]:
        return "start position is not navigable"
    reach = bfs_distances(nav, start_cell, -1) >= 0
    for r in rooms:
        if not reach[r.x0:r.x1, r.y0:r.y1, :].any():
            return f"room {r} unreachable"
    free = ~occ
    free_reach = bfs_distances(free, start_cell, -1) >= 0
    if free_reach.sum() < 0.99 * free.sum():
        return "enclosed free pockets exceed 1% of free space"
    return None
