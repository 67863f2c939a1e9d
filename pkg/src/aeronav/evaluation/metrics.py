"""SR / SPL / CR / FCR aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

CR_DEFINITION = "CR = collisions / steps * 100 (per-step rate, pooled over episodes)"
FCR_DEFINITION = "FCR = mean over episodes of visible reachable free cells / reachable free cells * 100"
SPL_DEFINITION = "SPL = mean_i S_i * l_i / max(p_i, l_i) * 100, l_i = BFS geodesic to the success region"


@dataclass
class EpisodeSummary:
    """The handful of numbers the metrics need from one episode."""

    success: bool
    path_length: float
    shortest_path: float
    collisions: int
    steps: int
    covered: int = 0
    reachable: int = 0
    target_class: str = ""

    @classmethod
    def of(cls, record) -> "EpisodeSummary":
        if isinstance(record, cls):
            return record
        return cls(record.success, record.path_length, record.shortest_path, record.collisions,
                   record.n_steps, record.covered, record.reachable, record.target_class)


def spl_term(success: bool, shortest: float, path: float) -> float:
    if not success:
        return 0.0
    if not math.isfinite(shortest):
        # success from a pose whose cell is outside the cell-level success region
        return 1.0
    denom = max(path, shortest)
    return 1.0 if denom == 0 else shortest / denom


@dataclass
class MetricsReport:
    sr: float
    spl: float
    cr: float
    fcr: float
    episodes: int
    steps: int
    collisions: int
    per_class: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["definitions"] = {"cr": CR_DEFINITION, "fcr": FCR_DEFINITION, "spl": SPL_DEFINITION}
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def per_class_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "episodes", "SR", "SPL", "CR", "FCR"])
        for name in sorted(self.per_class):
            r = self.per_class[name]
            w.writerow([name, r["episodes"], f"{r['sr']:.4f}", f"{r['spl']:.4f}", f"{r['cr']:.4f}",
                        f"{r['fcr']:.4f}"])
        return buf.getvalue()


def _aggregate(items: list[EpisodeSummary]) -> dict:
    n = len(items)
    if n == 0:
        return {"sr": 0.0, "spl": 0.0, "cr": 0.0, "fcr": 0.0, "episodes": 0, "steps": 0, "collisions": 0}
    succ = sum(1 for e in items if e.success)
    # fsum keeps the aggregate independent of episode order
    spl = math.fsum(spl_term(e.success, e.shortest_path, e.path_length) for e in items)
    steps = sum(e.steps for e in items)
    coll = sum(e.collisions for e in items)
    fcr = math.fsum(100.0 * e.covered / e.reachable if e.reachable else 0.0 for e in items) / n
    return {"sr": 100.0 * succ / n, "spl": 100.0 * spl / n, "cr": 100.0 * coll / steps if steps else 0.0,
            "fcr": fcr, "episodes": n, "steps": steps, "collisions": coll}


def compute_metrics(records) -> MetricsReport:
    items = [EpisodeSummary.of(r) for r in records]
    overall = _aggregate(items)
    groups = defaultdict(list)
    for e in items:
        groups[e.target_class].append(e)
    per_class = {name: _aggregate(group) for name, group in sorted(groups.items())}
    return MetricsReport(overall["sr"], overall["spl"], overall["cr"], overall["fcr"], overall["episodes"],
                         overall["steps"], overall["collisions"], per_class)
