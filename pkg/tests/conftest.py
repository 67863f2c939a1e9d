import numpy as np
import pytest

from aeronav.simulator import ObjectInstance, VoxelScene

RES = 0.15


def box_room(nx: int, ny: int, nz: int, objects=(), start=None, yaw: float = 0.0, taxonomy=None,
             blocks=()) -> VoxelScene:
    """Closed box room with one-cell walls, floor and ceiling.

    ``objects`` are (label, lo_cell, hi_cell) with exclusive upper cell
    corners, so the AABB is cell aligned and exactly matches its voxels.
    ``blocks`` are extra (lo_cell, hi_cell) structure boxes.
    """
    occ = np.zeros((nx, ny, nz), dtype=bool)
    occ[0], occ[-1] = True, True
    occ[:, 0], occ[:, -1] = True, True
    occ[:, :, 0], occ[:, :, -1] = True, True
    insts = []
    for n, (label, lo, hi) in enumerate(objects):
        occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
        insts.append(ObjectInstance(n + 1, label, tuple(c * RES for c in lo), tuple(c * RES for c in hi)))
    for lo, hi in blocks:
        occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    if taxonomy is None:
        taxonomy = {label: None for label, _, _ in objects}
        taxonomy.setdefault("Mug", None)
    if start is None:
        start = ((nx / 2) * RES, (ny / 2) * RES, 0.6)
    return VoxelScene(RES, occ, insts, taxonomy, seed=0, start=start, start_yaw=yaw)


@pytest.fixture
def small_room():
    """10 x 8 x 8 room with a single 2x2x2-cell target near the +x wall."""
    return box_room(10, 8, 8, objects=[("Mug", (7, 3, 2), (9, 5, 4))], start=(0.45, 0.6, 0.45))


# -- acceptance reporting ----------------------------------------------------------
# Tests marked ``@pytest.mark.acceptance(criterion=N, title=...)`` feed one
# summary line per criterion; details come from ``record_property("detail", ...)``.

_ACCEPTANCE: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or "criterion" not in marker.kwargs:
        return
    if rep.when != "call" and not rep.failed and not rep.skipped:
        return
    entry = _ACCEPTANCE.setdefault(marker.kwargs["criterion"],
                                   {"title": marker.kwargs.get("title", ""), "ok": True, "details": []})
    if rep.failed or rep.skipped:
        entry["ok"] = False
    if rep.when == "call":
        entry["details"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
                                    + (f"  [{detail}]" if detail else ""))
