"""Object plans: the part-level intermediate representation and its JSON form."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np
from scipy.spatial.transform import Rotation

from scenec.core import Aabb, RigidTransform, aabb_of_points, check_dims, union_aabbs
from scenec.errors import InvalidOverridePath, InvalidValue, SchemaError
from scenec.kernel.mesh import DEFAULT_MATERIAL, MaterialSpec

PLAN_SCHEMA_VERSION = 1
PRIMITIVES = ("box", "cyl", "sph", "torus", "curve")
MAX_NESTING = 2


class Provenance(str, Enum):
    BACKEND = "backend"
    TEMPLATE = "template"
    USER = "user"


class JointHint(str, Enum):
    HINGED = "hinged"
    SLIDING = "sliding"


@dataclass(frozen=True)
class Symmetry:
    """``none``, ``mirror_x`` (plane x = 0 of the parent frame) or ``radial`` about +z."""

    kind: str = "none"
    count: int = 0
    pivot: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("none", "mirror_x", "radial"):
            raise InvalidValue(f"unknown symmetry tag {self.kind!r}")
        if self.kind == "radial":
            if int(self.count) != self.count or self.count < 2:
                raise InvalidValue(f"radial symmetry needs count >= 2, got {self.count}")
            object.__setattr__(self, "count", int(self.count))
            object.__setattr__(self, "pivot", tuple(float(v) for v in self.pivot))

    @property
    def is_none(self) -> bool:
        return self.kind == "none"

    @property
    def copies(self) -> int:
        return {"none": 1, "mirror_x": 2}.get(self.kind, self.count)

    def to_json(self):
        if self.kind == "radial":
            return {"radial": {"count": self.count, "pivot": list(self.pivot)}}
        return self.kind

    @classmethod
    def from_json(cls, data) -> "Symmetry":
        if data is None:
            return cls()
        if isinstance(data, str):
            return cls(data)
        if isinstance(data, dict) and "radial" in data:
            r = data["radial"]
            return cls("radial", r.get("count", 0), tuple(r.get("pivot", (0.0, 0.0, 0.0))))
        raise InvalidValue(f"cannot parse symmetry tag {data!r}")


@dataclass(frozen=True)
class CurveSpec:
    points: tuple
    radius: float
    closed: bool = False

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "radius": self.radius, "closed": self.closed}

    @classmethod
    def from_json(cls, data) -> "CurveSpec":
        return cls(tuple(tuple(float(v) for v in p) for p in data["points"]), float(data["radius"]), bool(data.get("closed", False)))


@dataclass(frozen=True)
class PartSpec:
    """One semantic part.

    ``dims`` are primitive-specific: box extents; cyl x/y diameters and height;
    sph diameters; torus outer diameter (x), unused (y) and tube diameter (z);
    curve parts take their extent from ``curve``. ``local_pose`` places the
    primitive's center in the parent frame (the object frame at top level).
    """

    name: str
    primitive: str
    dims: tuple
    local_pose: RigidTransform = field(default_factory=RigidTransform)
    material: MaterialSpec = DEFAULT_MATERIAL
    symmetry: Symmetry = field(default_factory=Symmetry)
    movable: bool = False
    must_be_independent: bool = False
    sub_parts: tuple = ()
    joint_hint: JointHint | None = None
    role: str = ""
    shell_thickness: float | None = None
    bevel_width: float | None = None
    segments: object = None
    curve: CurveSpec | None = None

    def __post_init__(self):
        if not self.name or "/" in self.name:
            raise InvalidValue(f"part name must be non-empty and contain no '/': {self.name!r}")
        if self.primitive not in PRIMITIVES:
            raise InvalidValue(f"unknown primitive {self.primitive!r}")
        dims = tuple(float(v) for v in self.dims)
        if len(dims) != 3 or any(not math.isfinite(v) or v < 0 for v in dims):
            raise InvalidValue(f"part {self.name}: dims must be 3 finite non-negative values")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "sub_parts", tuple(self.sub_parts))
        if self.joint_hint is not None:
            object.__setattr__(self, "joint_hint", JointHint(self.joint_hint))
        if not self.role:
            object.__setattr__(self, "role", self.name)
        if self.primitive == "curve" and self.curve is None:
            raise InvalidValue(f"part {self.name}: curve primitive needs a curve polyline")
        if isinstance(self.segments, list):
            object.__setattr__(self, "segments", tuple(self.segments))

    def local_aabb(self) -> Aabb:
        """Extent of the built primitive in its own frame."""
        if self.primitive == "curve":
            pts = np.asarray(self.curve.points, dtype=float)
            return aabb_of_points(pts).inflate(self.curve.radius)
        d = np.asarray(self.dims)
        if self.primitive == "torus":
            d = np.array([d[0], d[0], d[2]])
        return Aabb(-d / 2, d / 2)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "role": self.role,
            "primitive": self.primitive,
            "dims": list(self.dims),
            "local_pose": self.local_pose.to_dict(),
            "material": self.material.to_dict(),
            "symmetry_tag": self.symmetry.to_json(),
            "movable": self.movable,
            "must_be_independent": self.must_be_independent,
        }
        if self.joint_hint is not None:
            out["joint_hint"] = self.joint_hint.value
        for key in ("shell_thickness", "bevel_width"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.segments is not None:
            out["segments"] = list(self.segments) if isinstance(self.segments, tuple) else self.segments
        if self.curve is not None:
            out["curve"] = self.curve.to_json()
        if self.sub_parts:
            out["sub_parts"] = [p.to_dict() for p in self.sub_parts]
        return out

    @classmethod
    def from_dict(cls, data: dict, depth: int = 0) -> "PartSpec":
        if depth > MAX_NESTING:
            raise SchemaError(f"sub_parts nested deeper than {MAX_NESTING}")
        try:
            sym = data.get("symmetry_tag", data.get("sym"))
            return cls(
                name=str(data["name"]),
                primitive=str(data["primitive"]),
                dims=tuple(data["dims"]),
                local_pose=RigidTransform.from_dict(data.get("local_pose")),
                material=MaterialSpec.from_dict(data["material"]) if data.get("material") else DEFAULT_MATERIAL,
                symmetry=Symmetry.from_json(sym),
                movable=bool(data.get("movable", False)),
                must_be_independent=bool(data.get("must_be_independent", False)),
                sub_parts=tuple(cls.from_dict(p, depth + 1) for p in data.get("sub_parts", [])),
                joint_hint=data.get("joint_hint"),
                role=str(data.get("role", "")),
                shell_thickness=data.get("shell_thickness"),
                bevel_width=data.get("bevel_width"),
                segments=data.get("segments"),
                curve=CurveSpec.from_json(data["curve"]) if data.get("curve") else None,
            )
        except KeyError as exc:
            raise SchemaError(f"part is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"invalid part {data.get('name', '?')}: {exc}") from exc


@dataclass(frozen=True)
class ObjectPlan:
    category: str
    target_dims: tuple
    parts: tuple
    style: str = ""
    provenance: Provenance = Provenance.TEMPLATE

    def __post_init__(self):
        object.__setattr__(self, "target_dims", tuple(float(v) for v in self.target_dims))
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if not self.parts:
            raise InvalidValue("plan must have at least one part")
        names = [fp.path for fp in flatten(self)]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise InvalidValue(f"duplicate part names: {dupes}")

    def to_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "category": self.category,
            "style": self.style,
            "target_dims": list(self.target_dims),
            "provenance": self.provenance.value,
            "parts": [p.to_dict() for p in self.parts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectPlan":
        if int(data.get("schema_version", PLAN_SCHEMA_VERSION)) > PLAN_SCHEMA_VERSION:
            raise SchemaError(f"plan schema version {data['schema_version']} is newer than supported")
        try:
            return cls(
                category=str(data["category"]),
                target_dims=tuple(data["target_dims"]),
                parts=tuple(PartSpec.from_dict(p) for p in data["parts"]),
                style=str(data.get("style", "")),
                provenance=data.get("provenance", "user"),
            )
        except KeyError as exc:
            raise SchemaError(f"plan is missing field {exc}") from None
        except InvalidValue as exc:
            raise SchemaError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ObjectPlan":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"plan is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def dims_in_bounds(self) -> bool:
        try:
            check_dims(self.target_dims)
        except InvalidValue:
            return False
        return True


# -- flattening ----------------------------------------------------------------


@dataclass(frozen=True)
class FlatPart:
    """A part with its path-qualified name and its pose in the object frame."""

    path: str
    spec: PartSpec
    pose: RigidTransform
    parent_pose: RigidTransform
    movable_root: str | None
    depth: int

    def instance_poses(self) -> list[RigidTransform]:
        """Object-frame poses of the part and its symmetry copies."""
        return symmetry_poses(self.spec.symmetry, self.pose, self.parent_pose)

    def world_aabb(self, with_copies: bool = True) -> Aabb:
        local = self.spec.local_aabb()
        poses = self.instance_poses() if with_copies else [self.pose]
        return union_aabbs(local.transformed(p) for p in poses)


def symmetry_poses(sym: Symmetry, pose: RigidTransform, parent: RigidTransform) -> list[RigidTransform]:
    """Poses of every copy generated by ``sym``; mirrored copies carry a proper
    rotation and the reflection is applied to the geometry itself."""
    if sym.kind == "none":
        return [pose]
    if sym.kind == "mirror_x":
        n = parent.rotation[:, 0]
        p = parent.translation
        refl = np.eye(3) - 2.0 * np.outer(n, n)
        t = pose.translation - 2.0 * ((pose.translation - p) @ n) * n
        return [pose, RigidTransform(refl @ pose.rotation @ np.diag([-1.0, 1.0, 1.0]), t)]
    axis = parent.rotation[:, 2]
    pivot = parent.apply(np.asarray(sym.pivot))
    out = []
    for k in range(sym.count):
        rot = Rotation.from_rotvec(axis * (2.0 * math.pi * k / sym.count)).as_matrix()
        tf = RigidTransform(rot, pivot - rot @ pivot)
        out.append(tf @ pose)
    return out


def flatten(plan_or_parts) -> list[FlatPart]:
    parts = plan_or_parts.parts if isinstance(plan_or_parts, ObjectPlan) else plan_or_parts
    out: list[FlatPart] = []

    def walk(specs, prefix, parent_pose, movable_root, depth):
        for spec in specs:
            path = f"{prefix}/{spec.name}" if prefix else spec.name
            pose = parent_pose @ spec.local_pose
            root = movable_root or (path if spec.movable else None)
            out.append(FlatPart(path, spec, pose, parent_pose, root, depth))
            walk(spec.sub_parts, path, pose, root, depth + 1)

    walk(parts, "", RigidTransform(), None, 0)
    return out


def plan_union_aabb(plan: ObjectPlan) -> Aabb:
    return union_aabbs(fp.world_aabb() for fp in flatten(plan))


# -- editing helpers -------------------------------------------------------------


def map_parts(plan: ObjectPlan, fn) -> ObjectPlan:
    """Rebuild a plan applying ``fn(path, spec) -> spec | None`` bottom-up.

    Returning None removes the part (and its sub-parts).
    """

    def walk(specs, prefix):
        out = []
        for spec in specs:
            path = f"{prefix}/{spec.name}" if prefix else spec.name
            spec = replace(spec, sub_parts=tuple(walk(spec.sub_parts, path)))
            new = fn(path, spec)
            if new is not None:
                out.append(new)
        return out

    return replace(plan, parts=tuple(walk(plan.parts, "")))


def iter_specs(plan: ObjectPlan) -> Iterator[tuple[str, PartSpec]]:
    for fp in flatten(plan):
        yield fp.path, fp.spec


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[([^\]]+)\])?")
_ALIASES = {"sym": "symmetry_tag", "pose": "local_pose", "d": "target_dims"}


def apply_override(plan: ObjectPlan, path: str, value) -> ObjectPlan:
    """Set a value addressed like ``parts[leaf].sym.radial.count``.

    ``parts[...]`` selects by part name (``a/b`` for sub-parts) or by index;
    list fields accept a numeric index (``dims[0]``).
    """
    data = set_path(plan.to_dict(), path, value)
    try:
        return ObjectPlan.from_dict(data)
    except (SchemaError, InvalidValue) as exc:
        raise InvalidOverridePath(f"{path!r}: value {value!r} is invalid: {exc}") from exc


def set_path(data: dict, path: str, value) -> dict:
    """Return a deep copy of plan JSON ``data`` with the addressed value replaced."""
    data = json.loads(json.dumps(data))
    tokens = path.split(".")
    if not tokens or not path:
        raise InvalidOverridePath("empty override path")
    node = data
    for i, tok in enumerate(tokens):
        m = _TOKEN.fullmatch(tok)
        if not m:
            raise InvalidOverridePath(f"bad path segment {tok!r} in {path!r}")
        key, sel = _ALIASES.get(m.group(1), m.group(1)), m.group(2)
        last = i == len(tokens) - 1
        if not isinstance(node, dict) or key not in node:
            raise InvalidOverridePath(f"{path!r}: no field {m.group(1)!r}")
        if sel is None:
            if last:
                node[key] = value
            else:
                node = node[key]
            continue
        container = node[key]
        if key in ("parts", "sub_parts"):
            target = _select_part(container, sel, path)
        else:
            if not isinstance(container, list):
                raise InvalidOverridePath(f"{path!r}: {key} is not a list")
            try:
                idx = int(sel)
                target = idx
                container[idx]
            except (ValueError, IndexError):
                raise InvalidOverridePath(f"{path!r}: bad index {sel!r}") from None
            if last:
                container[idx] = value
                continue
            node = container[idx]
            continue
        if last:
            raise InvalidOverridePath(f"{path!r}: cannot replace a whole part")
        node = target
    return data


def _select_part(parts: list, sel: str, path: str) -> dict:
    names = sel.split("/")
    node_list = parts
    found = None
    for name in names:
        found = None
        if name.isdigit() and int(name) < len(node_list):
            found = node_list[int(name)]
        else:
            for p in node_list:
                if p["name"] == name:
                    found = p
                    break
        if found is None:
            raise InvalidOverridePath(f"{path!r}: no part named {sel!r}")
        node_list = found.get("sub_parts", [])
    return found


def get_value(plan_or_data, path: str):
    """Read the value at an override path (used to detect no-op edits)."""
    data = plan_or_data.to_dict() if isinstance(plan_or_data, ObjectPlan) else plan_or_data
    node = data
    for tok in path.split("."):
        m = _TOKEN.fullmatch(tok)
        if not m:
            raise InvalidOverridePath(f"bad path segment {tok!r}")
        key, sel = _ALIASES.get(m.group(1), m.group(1)), m.group(2)
        if not isinstance(node, dict) or key not in node:
            raise InvalidOverridePath(f"{path!r}: no field {m.group(1)!r}")
        node = node[key]
        if sel is not None:
            if isinstance(node, list) and node and isinstance(node[0], dict) and "name" in node[0]:
                node = _select_part(node, sel, path)
            else:
                try:
                    node = node[int(sel)]
                except (ValueError, IndexError, TypeError):
                    raise InvalidOverridePath(f"{path!r}: bad index {sel!r}") from None
    return node
