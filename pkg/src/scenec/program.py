"""Part programs: a closed op list per part, its interpreter, and the build loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from scenec.core import Aabb, RigidTransform, union_aabbs
from scenec.errors import (
    BackendError,
    BuildFailure,
    ExecError,
    InvalidValue,
    KernelError,
    NameMismatch,
    SchemaError,
    UnloweredSymmetry,
)
from scenec.kernel import modifiers as mod
from scenec.kernel.mesh import MaterialSpec, TriMesh
from scenec.kernel.primitives import make_primitive
from scenec.plan import FlatPart, ObjectPlan, flatten

log = logging.getLogger(__name__)

PROGRAM_SCHEMA_VERSION = 1
MOVABLE_OVERLAP_TOL = 0.001
DIM_TOLERANCE = 0.10


# -- ops ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CreatePrimitive:
    kind: str
    params: dict
    segments: object = None
    tag = "create_primitive"


@dataclass(frozen=True)
class Transform:
    transform: RigidTransform
    tag = "transform"


@dataclass(frozen=True)
class MirrorAbout:
    point: tuple
    normal: tuple
    tag = "mirror_about"


@dataclass(frozen=True)
class RadialArray:
    pivot: tuple
    axis: tuple
    count: int
    tag = "radial_array"


@dataclass(frozen=True)
class Solidify:
    thickness: float
    tag = "solidify"


@dataclass(frozen=True)
class Bevel:
    width: float
    segments: int = 1
    tag = "bevel"


@dataclass(frozen=True)
class AssignMaterial:
    material: MaterialSpec
    selector: str = "all"
    tag = "assign_material"


@dataclass(frozen=True)
class GenerateUv:
    kind: str
    tag = "generate_uv"


OP_TYPES = {cls.tag: cls for cls in (CreatePrimitive, Transform, MirrorAbout, RadialArray, Solidify, Bevel, AssignMaterial, GenerateUv)}


def _json_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[k] = v
    return out


def op_to_dict(op) -> dict:
    if isinstance(op, CreatePrimitive):
        segs = list(op.segments) if isinstance(op.segments, (tuple, list)) else op.segments
        return {"op": op.tag, "kind": op.kind, "params": _json_params(op.params), "segments": segs}
    if isinstance(op, Transform):
        return {"op": op.tag, "transform": op.transform.to_exact_dict()}
    if isinstance(op, MirrorAbout):
        return {"op": op.tag, "point": list(op.point), "normal": list(op.normal)}
    if isinstance(op, RadialArray):
        return {"op": op.tag, "pivot": list(op.pivot), "axis": list(op.axis), "count": op.count}
    if isinstance(op, Solidify):
        return {"op": op.tag, "thickness": op.thickness}
    if isinstance(op, Bevel):
        return {"op": op.tag, "width": op.width, "segments": op.segments}
    if isinstance(op, AssignMaterial):
        return {"op": op.tag, "material": op.material.to_dict(), "selector": op.selector}
    if isinstance(op, GenerateUv):
        return {"op": op.tag, "kind": op.kind}
    raise InvalidValue(f"unknown op {op!r}")


def op_from_dict(data: dict):
    try:
        tag = data["op"]
        if tag == "create_primitive":
            segs = data.get("segments")
            return CreatePrimitive(str(data["kind"]), dict(data["params"]), tuple(segs) if isinstance(segs, list) else segs)
        if tag == "transform":
            return Transform(RigidTransform.from_dict(data["transform"]))
        if tag == "mirror_about":
            return MirrorAbout(tuple(float(v) for v in data["point"]), tuple(float(v) for v in data["normal"]))
        if tag == "radial_array":
            return RadialArray(tuple(float(v) for v in data["pivot"]), tuple(float(v) for v in data["axis"]), int(data["count"]))
        if tag == "solidify":
            return Solidify(float(data["thickness"]))
        if tag == "bevel":
            return Bevel(float(data["width"]), int(data.get("segments", 1)))
        if tag == "assign_material":
            return AssignMaterial(MaterialSpec.from_dict(data["material"]), str(data.get("selector", "all")))
        if tag == "generate_uv":
            return GenerateUv(str(data["kind"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed op {data!r}: {exc}") from exc
    raise SchemaError(f"unknown op tag {data.get('op')!r}")


@dataclass(frozen=True)
class PartProgram:
    part_name: str
    ops: tuple
    plan_part: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.plan_part:
            object.__setattr__(self, "plan_part", self.part_name)

    def validate(self) -> None:
        if not self.ops or not isinstance(self.ops[0], CreatePrimitive):
            raise InvalidValue(f"{self.part_name}: program must start with CreatePrimitive")
        if sum(isinstance(op, CreatePrimitive) for op in self.ops) != 1:
            raise InvalidValue(f"{self.part_name}: program has more than one CreatePrimitive")
        for i, op in enumerate(self.ops):
            for value in _numbers(op_to_dict(op)):
                if not math.isfinite(value):
                    raise InvalidValue(f"{self.part_name}: op {i} has a non-finite parameter")

    def to_dict(self) -> dict:
        return {"part_name": self.part_name, "plan_part": self.plan_part, "ops": [op_to_dict(op) for op in self.ops]}

    @classmethod
    def from_dict(cls, data: dict) -> "PartProgram":
        try:
            return cls(str(data["part_name"]), tuple(op_from_dict(o) for o in data["ops"]), str(data.get("plan_part", "")))
        except KeyError as exc:
            raise SchemaError(f"program missing field {exc}") from None


def _numbers(obj):
    if isinstance(obj, bool):
        return
    if isinstance(obj, (int, float)):
        yield float(obj)
    elif isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            yield from _numbers(v)


def programs_to_json(programs: Sequence[PartProgram]) -> str:
    doc = {"schema_version": PROGRAM_SCHEMA_VERSION, "programs": [p.to_dict() for p in programs]}
    return json.dumps(doc, indent=2, sort_keys=True)


def programs_from_json(text: str) -> list[PartProgram]:
    doc = json.loads(text)
    if int(doc.get("schema_version", 1)) > PROGRAM_SCHEMA_VERSION:
        raise SchemaError("program file is from a newer schema version")
    return [PartProgram.from_dict(p) for p in doc["programs"]]


# -- lowering ------------------------------------------------------------------------


def _create_op(fp: FlatPart) -> tuple[CreatePrimitive, str]:
    spec = fp.spec
    d = spec.dims
    shell = spec.shell_thickness is not None
    if spec.primitive == "box":
        kind = "open_box" if shell else "box"
        return CreatePrimitive(kind, {"size": list(d)}, None), kind
    if spec.primitive == "cyl":
        kind = "open_cyl" if shell else "cyl"
        return CreatePrimitive(kind, {"radius": d[0] / 2, "radius_y": d[1] / 2, "height": d[2]}, spec.segments), kind
    if spec.primitive == "sph":
        if shell:
            return CreatePrimitive("hemishell", {"radii": [d[0] / 2, d[1] / 2, d[2]]}, spec.segments), "hemishell"
        return CreatePrimitive("sph", {"radii": [d[0] / 2, d[1] / 2, d[2] / 2]}, spec.segments), "sph"
    if spec.primitive == "torus":
        minor = d[2] / 2
        return CreatePrimitive("torus", {"major": d[0] / 2 - minor, "minor": minor}, spec.segments), "torus"
    c = spec.curve
    params = {"points": [list(p) for p in c.points], "radius": c.radius, "closed": c.closed}
    return CreatePrimitive("curve", params, spec.segments), "curve"


def lower_part(fp: FlatPart) -> PartProgram:
    spec = fp.spec
    create, kind = _create_op(fp)
    ops: list = [create]
    if spec.shell_thickness is not None:
        ops.append(Solidify(float(spec.shell_thickness)))
    if spec.bevel_width:
        ops.append(Bevel(float(spec.bevel_width), 1))
    ops.append(Transform(fp.pose))
    if spec.symmetry.kind != "none":
        parent = fp.parent_pose
        if spec.symmetry.kind == "mirror_x":
            ops.append(MirrorAbout(tuple(parent.translation.tolist()), tuple(parent.rotation[:, 0].tolist())))
        else:
            pivot = parent.apply(np.asarray(spec.symmetry.pivot))
            ops.append(RadialArray(tuple(pivot.tolist()), tuple(parent.rotation[:, 2].tolist()), spec.symmetry.count))
    ops.append(AssignMaterial(spec.material))
    uv_kind = "canvas" if kind == "box" and spec.material.image_texture else kind
    ops.append(GenerateUv(uv_kind))
    return PartProgram(fp.path, tuple(ops), fp.path)


def compile_plan_to_programs(plan: ObjectPlan) -> list[PartProgram]:
    """One program per part, sub-parts flattened under path-qualified names."""
    flat = flatten(plan)
    for fp in flat:
        if fp.spec.movable and fp.spec.symmetry.kind != "none":
            raise UnloweredSymmetry(f"{fp.path}: movable part carries a symmetry tag")
        ancestors = [a for a in flat if fp.path.startswith(a.path + "/") and a.spec.symmetry.kind != "none"]
        if fp.spec.movable and ancestors:
            raise UnloweredSymmetry(f"{fp.path}: movable part inside replicated part {ancestors[0].path}")
    return [lower_part(fp) for fp in flat]


# -- interpreter ---------------------------------------------------------------------


def execute_program(prog: PartProgram) -> list[TriMesh]:
    """Run a program; returns one mesh, or several when an array/mirror op ran.

    Any kernel failure is reported as ExecError carrying the op index.
    """
    try:
        prog.validate()
    except InvalidValue as exc:
        raise ExecError(0, "MalformedProgram", str(exc), prog.part_name) from exc
    meshes: list[TriMesh] = []
    for i, op in enumerate(prog.ops):
        try:
            meshes = _apply(op, meshes, prog.part_name)
        except KernelError as exc:
            raise ExecError(i, exc.reason, str(exc), prog.part_name) from exc
        except (InvalidValue, ValueError) as exc:
            raise ExecError(i, "DegenerateParams", str(exc), prog.part_name) from exc
    for m in meshes:
        m.plan_part = prog.plan_part
    return meshes


def _apply(op, meshes: list[TriMesh], name: str) -> list[TriMesh]:
    if isinstance(op, CreatePrimitive):
        return [make_primitive(op.kind, op.params, op.segments, name)]
    if isinstance(op, Transform):
        return [m.transformed(op.transform) for m in meshes]
    if isinstance(op, Solidify):
        return [mod.solidify(m, op.thickness) for m in meshes]
    if isinstance(op, Bevel):
        return [mod.bevel_edges(m, op.width, op.segments) for m in meshes]
    if isinstance(op, MirrorAbout):
        out = []
        for m in meshes:
            out.extend([m, mod.mirror_about(m, op.point, op.normal, name=f"{m.part_name}_mirror")])
        return out
    if isinstance(op, RadialArray):
        out = []
        for m in meshes:
            out.extend(mod.radial_array(m, op.pivot, op.axis, op.count))
        return out
    if isinstance(op, AssignMaterial):
        return [m.with_(material_slots=[op.material], face_material=np.zeros(m.n_faces, dtype=np.int64)) for m in meshes]
    if isinstance(op, GenerateUv):
        return [mod.generate_uv(m, op.kind) for m in meshes]
    raise InvalidValue(f"unknown op {op!r}")


# -- assembly and critique -------------------------------------------------------------


@dataclass
class ObjectAsset:
    id: str
    plan: ObjectPlan
    parts: list
    object_aabb: Aabb
    programs: list
    stats: dict = field(default_factory=dict)

    def meshes_for(self, plan_part: str) -> list[TriMesh]:
        return [m for m in self.parts if m.plan_part == plan_part]


def assemble_object(plan: ObjectPlan, meshes: Sequence[TriMesh], programs: Sequence[PartProgram] = (), asset_id: str = "") -> ObjectAsset:
    """Collect part meshes (already in the object frame) into an asset; no welding."""
    expected = {fp.path for fp in flatten(plan)}
    have = {m.plan_part for m in meshes}
    if expected != have:
        missing = sorted(expected - have)
        extra = sorted(have - expected)
        raise NameMismatch(f"plan parts and meshes differ: missing {missing}, unexpected {extra}")
    names = [m.part_name for m in meshes]
    if len(set(names)) != len(names):
        raise NameMismatch("duplicate mesh names")
    aabb = union_aabbs(m.aabb() for m in meshes)
    return ObjectAsset(asset_id or plan.category, plan, list(meshes), aabb, list(programs))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    reasons: tuple = ()

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reasons": list(self.reasons)}

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(bool(data["passed"]), tuple(str(r) for r in data.get("reasons", ())))


def movable_groups(asset: ObjectAsset) -> dict[str, list[TriMesh]]:
    """Meshes of each movable plan part, including its sub-parts."""
    roots = {fp.path: fp.movable_root for fp in flatten(asset.plan)}
    groups: dict[str, list[TriMesh]] = {}
    for m in asset.parts:
        root = roots.get(m.plan_part)
        if root is not None:
            groups.setdefault(root, []).append(m)
    return groups


def critic_review(asset: ObjectAsset) -> Verdict:
    """Deterministic geometric critic."""
    reasons = []
    d = np.asarray(asset.plan.target_dims)
    ext = asset.object_aabb.extents
    dev = np.abs(ext - d) / d
    for axis, name in enumerate("xyz"):
        if dev[axis] > DIM_TOLERANCE:
            reasons.append(f"size: extent {name} {ext[axis]:.4f} m deviates {dev[axis] * 100:.1f}% from target {d[axis]:.4f} m")
    have = {m.plan_part for m in asset.parts}
    for fp in flatten(asset.plan):
        if fp.path not in have:
            reasons.append(f"missing part: {fp.path}")
    groups = sorted(movable_groups(asset).items())
    boxes = [(name, union_aabbs(m.aabb() for m in ms)) for name, ms in groups]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            depth = boxes[i][1].overlap_depth(boxes[j][1])
            if np.all(depth > MOVABLE_OVERLAP_TOL):
                reasons.append(f"movable overlap: {boxes[i][0]} and {boxes[j][0]} interpenetrate by {depth.min() * 1000:.1f} mm")
    for m in asset.parts:
        if not m.material_slots or any(s is None for s in m.material_slots):
            reasons.append(f"material: {m.part_name} has an empty material slot")
    return Verdict(not reasons, tuple(reasons))


# -- the two-budget loop ----------------------------------------------------------------


@dataclass(frozen=True)
class LoopBudgets:
    k_exec: int = 3
    k_ref: int = 2

    def __post_init__(self):
        if self.k_exec < 0 or self.k_ref < 0:
            raise InvalidValue("budgets must be non-negative")


def build_with_repair(
    plan: ObjectPlan,
    backend,
    budgets: LoopBudgets = LoopBudgets(),
    asset_id: str = "",
    executor: Callable[[PartProgram], list[TriMesh]] = execute_program,
    reverify: Callable[[ObjectPlan], ObjectPlan] | None = None,
) -> ObjectAsset:
    """Execute every part with up to ``k_exec`` repairs, then run the critic with
    up to ``k_ref`` plan revisions. The per-part repair budget resets each round.

    ``reverify`` re-checks a revised plan; a revision it rejects counts as a
    spent attempt and the previous plan is rebuilt.
    """
    current = plan
    refinements = 0
    total_repairs = 0
    while True:
        programs = compile_plan_to_programs(current)
        meshes: list[TriMesh] = []
        used_programs: list[PartProgram] = []
        failure: tuple | None = None
        for prog in programs:
            result, final_prog, repairs, err = _execute_with_repair(prog, backend, budgets.k_exec, executor)
            total_repairs += repairs
            if result is None:
                failure = failure or (prog.part_name, err, repairs)
                continue
            meshes.extend(result)
            used_programs.append(final_prog)
        if failure is not None:
            part, err, repairs = failure
            raise BuildFailure("exec", repairs, str(err), part)
        asset = assemble_object(current, meshes, used_programs, asset_id)
        verdict = _critique(backend, asset)
        if verdict.passed:
            asset.stats = {"repairs": total_repairs, "refinements": refinements}
            return asset
        if refinements >= budgets.k_ref:
            raise BuildFailure("refine", refinements, "; ".join(verdict.reasons))
        refinements += 1
        try:
            revised = backend.revise_plan(current, list(verdict.reasons))
            if reverify is not None:
                revised = reverify(revised)
            current = revised
        except BackendError as exc:
            log.warning("plan revision failed: %s", exc)
        except Exception as exc:  # a rejected revision is a spent attempt, not a crash
            log.warning("revised plan rejected: %s", exc)


def _execute_with_repair(prog, backend, k_exec, executor):
    attempt = prog
    repairs = 0
    while True:
        try:
            return executor(attempt), attempt, repairs, None
        except ExecError as err:
            last = err
        while True:
            if repairs >= k_exec:
                return None, attempt, repairs, last
            repairs += 1
            try:
                attempt = backend.repair_program(attempt, last)
                break
            except BackendError as exc:
                # A failed repair call spends an attempt without a new program.
                last = ExecError(last.op_index, last.reason, f"{last.detail}; repair failed: {exc}", last.part_name)


def _critique(backend, asset: ObjectAsset) -> Verdict:
    caps = getattr(backend, "capabilities", None)
    if caps is not None and getattr(caps, "can_critique", False):
        try:
            verdict = backend.critique(asset)
            if verdict is not None:
                return verdict
        except BackendError as exc:
            log.warning("backend critique failed (%s); using the geometric critic", exc)
    return critic_review(asset)


def replay(programs: Sequence[PartProgram]) -> list[TriMesh]:
    out: list[TriMesh] = []
    for prog in programs:
        out.extend(execute_program(prog))
    return out


def with_ops(prog: PartProgram, ops) -> PartProgram:
    return replace(prog, ops=tuple(ops))
