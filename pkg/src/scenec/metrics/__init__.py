"""Object and scene metric suite."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from scenec.metrics.asset import AssetReport, object_metrics, uv_islands
from scenec.metrics.layout import (
    accessibility_metric,
    collision_metric,
    floor_grid,
    nav_metric,
    oob_metric,
    opening_clearance_metric,
    relation_check,
    support_metric,
)

SCENE_METRICS = ("col", "nav", "oob", "sup", "acc", "opc")


@dataclass
class SceneReport:
    """Fractions are None when a metric was not requested or has nothing to judge."""

    col: float | None = None
    oob: float | None = None
    nav: float | None = None
    sup: float | None = None
    acc: float | None = None
    opc: float | None = None
    relations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def scene_report(house, ont, metrics=SCENE_METRICS, relations=(), seed: int = 0, samples_per_object: int = 256) -> SceneReport:
    rep = SceneReport()
    grid = None
    if "col" in metrics:
        rep.col, pairs = collision_metric(house)
        rep.details["col_pairs"] = [list(p) for p in pairs]
    if "oob" in metrics:
        rep.oob, flagged = oob_metric(house, samples_per_object, seed)
        rep.details["oob_objects"] = flagged
    if "nav" in metrics or "acc" in metrics:
        grid = floor_grid(house)
    if "nav" in metrics:
        rep.nav = grid.nav
    if "sup" in metrics:
        rep.sup, bad = support_metric(house)
        rep.details["unsupported"] = bad
    if "acc" in metrics:
        rep.acc, blocked = accessibility_metric(house, ont, grid)
        rep.details["inaccessible"] = blocked
    if "opc" in metrics:
        rep.opc, blocked = opening_clearance_metric(house)
        rep.details["blocked_openings"] = [list(b) for b in blocked]
    if relations:
        rep.relations = relation_check(house, list(relations))
    return rep


__all__ = [
    "AssetReport",
    "SceneReport",
    "object_metrics",
    "uv_islands",
    "scene_report",
    "collision_metric",
    "oob_metric",
    "nav_metric",
    "support_metric",
    "accessibility_metric",
    "opening_clearance_metric",
    "relation_check",
]
