"""Grid traversal kernels (Amanatides & Woo) compiled with numba.

All kernels are sequential loops, so results are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _init_axis(o, d, cell, res):
    if d > 0.0:
        return 1, ((cell + 1) * res - o) / d, res / d
    if d < 0.0:
        return -1, (cell * res - o) / d, -res / d
    return 0, INF, INF


@njit(cache=True)
def cast_rays(occ, inst, res, origin, dirs, max_t):
    """First occupied cell along each unit ray.

    Returns (t_hit, instance) where t_hit is the distance at which the ray
    enters the hit cell (inf if nothing is hit within ``max_t``) and instance
    is the instance-grid value of that cell (-1 on a miss).
    """
    n = dirs.shape[0]
    nx, ny, nz = occ.shape
    t_hit = np.full(n, INF)
    hit_inst = np.full(n, -1, dtype=np.int32)
    ox, oy, oz = origin[0], origin[1], origin[2]
    cx0 = int(np.floor(ox / res))
    cy0 = int(np.floor(oy / res))
    cz0 = int(np.floor(oz / res))
    for r in range(n):
        cx, cy, cz = cx0, cy0, cz0
        if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
            t_hit[r] = 0.0
            continue
        if occ[cx, cy, cz]:
            t_hit[r] = 0.0
            hit_inst[r] = inst[cx, cy, cz]
            continue
        sx, tmx, tdx = _init_axis(ox, dirs[r, 0], cx, res)
        sy, tmy, tdy = _init_axis(oy, dirs[r, 1], cy, res)
        sz, tmz, tdz = _init_axis(oz, dirs[r, 2], cz, res)
        while True:
            if tmx <= tmy and tmx <= tmz:
                t = tmx
                cx += sx
                tmx += tdx
            elif tmy <= tmz:
                t = tmy
                cy += sy
                tmy += tdy
            else:
                t = tmz
                cz += sz
                tmz += tdz
            if t > max_t:
                break
            if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
                t_hit[r] = t
                break
            if occ[cx, cy, cz]:
                t_hit[r] = t
                hit_inst[r] = inst[cx, cy, cz]
                break
    return t_hit, hit_inst


@njit(cache=True)
def cells_visible(occ, res, origin, targets):
    """Whether the segment from ``origin`` to each target cell centre crosses
    no occupied cell before entering the target cell."""
    m = targets.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    nx, ny, nz = occ.shape
    ox, oy, oz = origin[0], origin[1], origin[2]
    cx0 = int(np.floor(ox / res))
    cy0 = int(np.floor(oy / res))
    cz0 = int(np.floor(oz / res))
    for i in range(m):
        tx, ty, tz = targets[i, 0], targets[i, 1], targets[i, 2]
        if occ[cx0, cy0, cz0]:
            continue
        if cx0 == tx and cy0 == ty and cz0 == tz:
            out[i] = True
            continue
        dx = (tx + 0.5) * res - ox
        dy = (ty + 0.5) * res - oy
        dz = (tz + 0.5) * res - oz
        length = np.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= length
        dy /= length
        dz /= length
        cx, cy, cz = cx0, cy0, cz0
        sx, tmx, tdx = _init_axis(ox, dx, cx, res)
        sy, tmy, tdy = _init_axis(oy, dy, cy, res)
        sz, tmz, tdz = _init_axis(oz, dz, cz, res)
        ok = True
        while True:
            if tmx <= tmy and tmx <= tmz:
                t = tmx
                cx += sx
                tmx += tdx
            elif tmy <= tmz:
                t = tmy
                cy += sy
                tmy += tdy
            else:
                t = tmz
                cz += sz
                tmz += tdz
            if cx == tx and cy == ty and cz == tz:
                break
            if t >= length:
                # grazing an edge/corner: the centre was reached via a neighbour
                break
            if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz or occ[cx, cy, cz]:
                ok = False
                break
        out[i] = ok
    return out


@njit(cache=True)
def sphere_hits(occ, res, p, radius):
    """True if a sphere overlaps any occupied (or out-of-bounds) cell."""
    nx, ny, nz = occ.shape
    i0 = int(np.floor((p[0] - radius) / res))
    i1 = int(np.floor((p[0] + radius) / res))
    j0 = int(np.floor((p[1] - radius) / res))
    j1 = int(np.floor((p[1] + radius) / res))
    k0 = int(np.floor((p[2] - radius) / res))
    k1 = int(np.floor((p[2] + radius) / res))
    r2 = radius * radius
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            for k in range(k0, k1 + 1):
                if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
                    if not occ[i, j, k]:
                        continue
                ex = max(i * res - p[0], 0.0, p[0] - (i + 1) * res)
                ey = max(j * res - p[1], 0.0, p[1] - (j + 1) * res)
                ez = max(k * res - p[2], 0.0, p[2] - (k + 1) * res)
                if ex * ex + ey * ey + ez * ez < r2:
                    return True
    return False


@njit(cache=True)
def bfs_distances(free, start, max_steps):
    """6-connected BFS step counts over ``free`` cells (-1 = unreachable)."""
    nx, ny, nz = free.shape
    dist = np.full((nx, ny, nz), -1, dtype=np.int32)
    if not free[start[0], start[1], start[2]]:
        return dist
    qx = np.empty(nx * ny * nz, dtype=np.int32)
    qy = np.empty(nx * ny * nz, dtype=np.int32)
    qz = np.empty(nx * ny * nz, dtype=np.int32)
    head = 0
    tail = 0
    qx[0], qy[0], qz[0] = start[0], start[1], start[2]
    tail = 1
    dist[start[0], start[1], start[2]] = 0
    offs = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
    while head < tail:
        x, y, z = qx[head], qy[head], qz[head]
        head += 1
        d = dist[x, y, z]
        if max_steps >= 0 and d >= max_steps:
            continue
        for o in range(6):
            a = x + offs[o, 0]
            b = y + offs[o, 1]
            c = z + offs[o, 2]
            if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz and free[a, b, c] and dist[a, b, c] < 0:
                dist[a, b, c] = d + 1
                qx[tail], qy[tail], qz[tail] = a, b, c
                tail += 1
    return dist
