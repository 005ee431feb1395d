"""Plan checks that repair or reject an ObjectPlan before geometry is built.

Four rule families run in a fixed order: completeness, dimensions, spatial
consistency and movable-part independence. Each returns issues plus the
repaired plan; ``verify`` applies them all and re-checks once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from scenec.core import Aabb, RigidTransform
from scenec.errors import NonConvergent
from scenec.plan import CurveSpec, ObjectPlan, PartSpec, Symmetry, flatten, map_parts, plan_union_aabb
from scenec.router import CategoryOntology, PartDefault

MIN_PART_DIM = 0.001
OVERFLOW = 1.05
CONTACT_MARGIN = 0.005
GROUND_TOL = 0.001
_REL = 1e-9


class Rule(str, Enum):
    COMPLETENESS = "completeness"
    DIMENSION = "dimension"
    SPATIAL = "spatial"
    MOVABLE = "movable_independence"


class Severity(str, Enum):
    FIXED = "fixed"
    REJECTED = "rejected"
    # Informational only; never blocks and never counts as a new fix.
    WARNING = "warning"


@dataclass(frozen=True)
class Issue:
    rule: Rule
    severity: Severity
    detail: str
    part: str | None = None

    def to_dict(self) -> dict:
        out = {"rule": self.rule.value, "severity": self.severity.value, "detail": self.detail}
        if self.part is not None:
            out["part"] = self.part
        return out


@dataclass(frozen=True)
class VerificationReport:
    issues: tuple
    verified_plan: ObjectPlan | None

    @property
    def ok(self) -> bool:
        return self.verified_plan is not None

    @property
    def blocking(self) -> list[Issue]:
        return [i for i in self.issues if i.severity is not Severity.WARNING]

    def to_dict(self) -> dict:
        return {
            "verified": self.ok,
            "issues": [i.to_dict() for i in self.issues],
            "verified_plan": self.verified_plan.to_dict() if self.verified_plan else None,
        }

    def to_text(self) -> str:
        lines = [f"verified: {'yes' if self.ok else 'no'} ({len(self.issues)} issues)"]
        for i in self.issues:
            where = f" [{i.part}]" if i.part else ""
            lines.append(f"  {i.severity.value:8s} {i.rule.value}{where}: {i.detail}")
        return "\n".join(lines)


# -- part editing helpers ----------------------------------------------------------


def _translate_parts(plan: ObjectPlan, paths: set[str], delta) -> ObjectPlan:
    """Translate the given parts by ``delta`` in the object frame.

    Only the outermost selected part of each subtree is moved, since
    sub-parts follow their parent.
    """
    delta = np.asarray(delta, dtype=float)
    flat = {fp.path: fp for fp in flatten(plan)}
    roots = {p for p in paths if not any(p.startswith(q + "/") for q in paths)}

    def fn(path, spec):
        if path not in roots:
            return spec
        local_delta = flat[path].parent_pose.rotation.T @ delta
        pose = replace(spec.local_pose, translation=spec.local_pose.translation + local_delta)
        return replace(spec, local_pose=pose)

    return map_parts(plan, fn)


def _scale_spec(spec: PartSpec, s: float) -> PartSpec:
    pose = replace(spec.local_pose, translation=spec.local_pose.translation * s)
    sym = spec.symmetry
    if sym.kind == "radial":
        sym = Symmetry("radial", sym.count, tuple(np.asarray(sym.pivot) * s))
    curve = spec.curve
    if curve is not None:
        curve = CurveSpec(tuple(tuple(float(v) * s for v in p) for p in curve.points), curve.radius * s, curve.closed)
    return replace(
        spec,
        dims=spec.dims if spec.primitive == "curve" else tuple(max(d * s, MIN_PART_DIM) for d in spec.dims),
        local_pose=pose,
        symmetry=sym,
        curve=curve,
        shell_thickness=None if spec.shell_thickness is None else spec.shell_thickness * s,
        bevel_width=None if spec.bevel_width is None else spec.bevel_width * s,
    )


def _default_part(role: str, default: PartDefault | None, d: np.ndarray, taken: set[str], movable: bool) -> PartSpec:
    if default is None:
        default = PartDefault("box", (0.3, 0.3, 0.3), (0.0, 0.0, 0.5))
    name = role
    k = 1
    while name in taken:
        k += 1
        name = f"{role}_{k}"
    dims = tuple(float(v) for v in np.asarray(default.rel_dims) * d)
    pos = np.asarray(default.rel_pos) * d
    return PartSpec(
        name=name,
        role=role,
        primitive=default.primitive,
        dims=dims,
        local_pose=RigidTransform.from_translation(pos),
        movable=movable,
        must_be_independent=movable,
    )


def _has_movable(spec: PartSpec) -> bool:
    return spec.movable or any(_has_movable(s) for s in spec.sub_parts)


# -- the four checks ---------------------------------------------------------------


def completeness(plan: ObjectPlan, ont: CategoryOntology) -> tuple[list[Issue], ObjectPlan]:
    entry = ont.lookup(plan.category)
    if entry is None:
        return [Issue(Rule.COMPLETENESS, Severity.WARNING, f"category {plan.category!r} not in ontology; completeness skipped")], plan
    issues: list[Issue] = []
    seen: set[str] = set()
    keep = []
    for spec in plan.parts:
        repeatable = spec.role in entry.repeatable_roles or spec.role not in entry.required_parts
        if spec.role in seen and not repeatable and not _has_movable(spec):
            issues.append(Issue(Rule.COMPLETENESS, Severity.FIXED, f"duplicate part with role {spec.role!r} removed", spec.name))
            continue
        seen.add(spec.role)
        keep.append(spec)
    roles = {fp.spec.role for fp in flatten(keep)}
    taken = {s.name for s in keep}
    d = np.asarray(plan.target_dims)
    for role in entry.required_parts:
        if role in roles:
            continue
        part = _default_part(role, entry.part_defaults.get(role), d, taken, role in entry.movable_roles)
        taken.add(part.name)
        keep.append(part)
        issues.append(Issue(Rule.COMPLETENESS, Severity.FIXED, f"missing required part {role!r} inserted", part.name))
    if not issues:
        return issues, plan
    return issues, replace(plan, parts=tuple(keep))


def dimensions(plan: ObjectPlan) -> tuple[list[Issue], ObjectPlan]:
    if not plan.dims_in_bounds():
        return [Issue(Rule.DIMENSION, Severity.REJECTED, f"target dims {list(plan.target_dims)} outside [0.001, 20] m")], plan
    issues: list[Issue] = []

    def clamp(path, spec):
        # Curve parts take their extent from the polyline; dims are unused.
        if spec.primitive != "curve" and any(v < MIN_PART_DIM for v in spec.dims):
            issues.append(Issue(Rule.DIMENSION, Severity.FIXED, f"dims {list(spec.dims)} clamped to >= 1 mm", path))
            return replace(spec, dims=tuple(max(v, MIN_PART_DIM) for v in spec.dims))
        return spec

    plan = map_parts(plan, clamp)
    d = np.asarray(plan.target_dims)
    ext = plan_union_aabb(plan).extents
    limit = OVERFLOW * d
    if np.any(ext > limit * (1 + _REL)):
        s = float(np.min(np.where(ext > 0, limit / np.maximum(ext, 1e-300), np.inf)))
        s = min(s, 1.0)
        issues.append(Issue(Rule.DIMENSION, Severity.FIXED, f"union extents {ext.round(4).tolist()} exceed 1.05 x target; rescaled by {s:.6f}"))
        plan = replace(plan, parts=tuple(scale_part_tree(p, s) for p in plan.parts))
    return issues, plan


def scale_part_tree(spec: PartSpec, s: float) -> PartSpec:
    scaled = _scale_spec(spec, s)
    return replace(scaled, sub_parts=tuple(scale_part_tree(c, s) for c in spec.sub_parts))


def _components(boxes: list[Aabb]) -> list[list[int]]:
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    inflated = [b.inflate(CONTACT_MARGIN) for b in boxes]
    for i in range(n):
        for j in range(i + 1, n):
            if inflated[i].intersects(inflated[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _gap_vector(a: Aabb, b: Aabb) -> np.ndarray:
    """Smallest translation of ``a`` that makes it touch ``b``."""
    g = np.zeros(3)
    for i in range(3):
        if a.min[i] > b.max[i]:
            g[i] = b.max[i] - a.min[i]
        elif b.min[i] > a.max[i]:
            g[i] = b.min[i] - a.max[i]
    return g


def spatial(plan: ObjectPlan) -> tuple[list[Issue], ObjectPlan]:
    issues: list[Issue] = []
    for fp in flatten(plan):
        zmin = fp.world_aabb().min[2]
        if zmin < -GROUND_TOL:
            issues.append(Issue(Rule.SPATIAL, Severity.FIXED, f"part below ground (min z {zmin:.4f} m) lifted to z = 0", fp.path))
            plan = _translate_parts(plan, {fp.path}, [0.0, 0.0, -zmin])

    flat = flatten(plan)
    boxes = [fp.world_aabb() for fp in flat]
    comps = _components(boxes)
    if len(comps) > 1:
        comps.sort(key=lambda c: (-len(c), c[0]))
        main = set(comps[0])
        for comp in comps[1:]:
            best = None
            for i in comp:
                for j in sorted(main):
                    g = _gap_vector(boxes[i], boxes[j])
                    key = (float(np.linalg.norm(g)), i, j)
                    if best is None or key < best[0]:
                        best = (key, g)
            g = best[1]
            paths = {flat[i].path for i in comp}
            names = ", ".join(sorted(paths))
            issues.append(Issue(Rule.SPATIAL, Severity.FIXED, f"floating parts moved by {np.round(g, 4).tolist()} m into contact", names))
            plan = _translate_parts(plan, paths, g)
            for i in comp:
                boxes[i] = Aabb(boxes[i].min + g, boxes[i].max + g)
            main |= set(comp)
    return issues, plan


def movable_independence(plan: ObjectPlan) -> tuple[list[Issue], ObjectPlan]:
    issues: list[Issue] = []
    sym_paths = {fp.path for fp in flatten(plan) if not fp.spec.symmetry.is_none}
    for fp in flatten(plan):
        if not fp.spec.movable:
            continue
        copied_by = [p for p in sym_paths if fp.path == p or fp.path.startswith(p + "/")]
        if copied_by:
            issues.append(Issue(Rule.MOVABLE, Severity.REJECTED, f"movable part is replicated by the symmetry tag of {sorted(copied_by)[0]!r}", fp.path))

    def fix(path, spec):
        if spec.movable and not spec.must_be_independent:
            issues.append(Issue(Rule.MOVABLE, Severity.FIXED, "movable part marked must_be_independent", path))
            return replace(spec, must_be_independent=True)
        return spec

    plan = map_parts(plan, fix)
    return issues, plan


def check_completeness(plan: ObjectPlan, ont: CategoryOntology) -> list[Issue]:
    return completeness(plan, ont)[0]


def check_dimensions(plan: ObjectPlan) -> list[Issue]:
    return dimensions(plan)[0]


def check_spatial(plan: ObjectPlan) -> list[Issue]:
    return spatial(plan)[0]


def check_movable_independence(plan: ObjectPlan) -> list[Issue]:
    return movable_independence(plan)[0]


def _run_all(plan: ObjectPlan, ont: CategoryOntology) -> tuple[list[Issue], ObjectPlan]:
    issues: list[Issue] = []
    for check in (lambda p: completeness(p, ont), dimensions, spatial, movable_independence):
        found, plan = check(plan)
        issues.extend(found)
    return issues, plan


def verify(plan: ObjectPlan, ont: CategoryOntology) -> VerificationReport:
    """Apply all fixes, then re-check once.

    Raises NonConvergent when the re-check still finds fixable issues.
    """
    issues, fixed = _run_all(plan, ont)
    if any(i.severity is Severity.REJECTED for i in issues):
        return VerificationReport(tuple(issues), None)
    again, _ = _run_all(fixed, ont)
    new = [i for i in again if i.severity is not Severity.WARNING]
    if new:
        raise NonConvergent(new)
    if not any(i.severity is Severity.FIXED for i in issues):
        fixed = plan
    return VerificationReport(tuple(issues), fixed)


def report_json(report: VerificationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)


def part_aabbs(plan: ObjectPlan) -> dict[str, Aabb]:
    return {fp.path: fp.world_aabb() for fp in flatten(plan)}



