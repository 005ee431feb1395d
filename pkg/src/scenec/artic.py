"""Compile a built object into links, joints and rigid-body attributes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from scenec.core import Aabb, RigidTransform, aabb_of_points, union_aabbs
from scenec.errors import InvalidValue, OpenMeshNotShell, UnclassifiableMovable
from scenec.kernel.mesh import MaterialSpec, TriMesh, is_closed, surface_area
from scenec.plan import JointHint, flatten
from scenec.program import ObjectAsset, movable_groups
from scenec.router import Strategy

log = logging.getLogger(__name__)

MASS_MIN = 0.05
MASS_MAX = 300.0
# Assumed wall thickness when an open shell has to be weighed.
SHELL_THICKNESS = 0.003
PRISMATIC_TRAVEL = 0.8
BASE_LINK = "base_link"

# Canonical second moment of the unit tetrahedron (0, e1, e2, e3).
_TET_COV = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 120.0


class JointType(str, Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


@dataclass(frozen=True)
class JointSpec:
    name: str
    parent_link: str
    child_link: str
    joint_type: JointType
    origin: RigidTransform
    axis: tuple
    limits: tuple

    def __post_init__(self):
        object.__setattr__(self, "joint_type", JointType(self.joint_type))
        axis = tuple(float(v) for v in self.axis)
        if abs(math.sqrt(sum(v * v for v in axis)) - 1.0) > 1e-9:
            raise InvalidValue(f"joint {self.name}: axis must be unit length")
        lo, hi = (float(v) for v in self.limits)
        if lo > hi:
            raise InvalidValue(f"joint {self.name}: lower limit exceeds upper")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (lo, hi))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parent_link": self.parent_link,
            "child_link": self.child_link,
            "joint_type": self.joint_type.value,
            "origin": self.origin.to_dict(),
            "axis": list(self.axis),
            "limits": list(self.limits),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JointSpec":
        return cls(
            data["name"],
            data["parent_link"],
            data["child_link"],
            data["joint_type"],
            RigidTransform.from_dict(data["origin"]),
            tuple(data["axis"]),
            tuple(data["limits"]),
        )


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray
    name: str = ""

    def corners(self) -> np.ndarray:
        signs = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
        return (signs * self.half_extents) @ self.rotation.T + self.center

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        local = (np.asarray(points) - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.half_extents + tol, axis=1)


@dataclass
class PhysicalAttrs:
    mass: float
    inertia: np.ndarray
    com: np.ndarray
    collision_proxies: list
    warnings: list = field(default_factory=list)


@dataclass
class Link:
    name: str
    meshes: list
    attrs: PhysicalAttrs


@dataclass
class SimAsset:
    id: str
    base_link: Link
    movable_links: list
    joints: list
    route: Strategy = Strategy.STATIC_FURN
    warnings: list = field(default_factory=list)

    @property
    def links(self) -> list[Link]:
        return [self.base_link, *self.movable_links]

    @property
    def total_mass(self) -> float:
        return float(sum(link.attrs.mass for link in self.links))


# -- mass properties ------------------------------------------------------------------


def _volume_moments(mesh: TriMesh) -> tuple[float, np.ndarray, np.ndarray]:
    """Volume, first moment and second moment (about the origin) of a closed mesh."""
    v = mesh.vertices
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    vol = det.sum() / 6.0
    first = (det[:, None] * (a + b + c)).sum(axis=0) / 24.0
    # A maps the canonical tetrahedron to (0, a, b, c); columns are a, b, c.
    A = np.stack([a, b, c], axis=2)
    second = np.einsum("n,nij,jk,nlk->il", det, A, _TET_COV, A)
    return float(vol), first, second


def mesh_volume(mesh: TriMesh) -> float:
    return _volume_moments(mesh)[0]


def estimate_mass(mesh: TriMesh, material: MaterialSpec | None = None, shell: bool = False) -> float:
    """Density of the material family times enclosed (or nominal shell) volume, clamped."""
    material = material or (mesh.material_slots[0] if mesh.material_slots else MaterialSpec("plastic"))
    if is_closed(mesh):
        volume = abs(mesh_volume(mesh))
    elif shell:
        volume = surface_area(mesh) * SHELL_THICKNESS
    else:
        raise OpenMeshNotShell(f"{mesh.part_name}: open mesh must be declared a shell to be weighed")
    return float(np.clip(material.density * volume, MASS_MIN, MASS_MAX))


def box_inertia(extents, mass: float) -> np.ndarray:
    x, y, z = np.asarray(extents, dtype=float)
    return mass / 12.0 * np.diag([y * y + z * z, x * x + z * z, x * x + y * y])


def inertia_tensor(mesh: TriMesh, mass: float) -> tuple[np.ndarray, np.ndarray, bool]:
    """Inertia about the center of mass, the center of mass, and an
    approximation flag (True when the AABB fallback for open meshes was used).
    """
    if mass <= 0:
        raise InvalidValue("mass must be positive")
    vol = 0.0
    if is_closed(mesh):
        vol, first, second = _volume_moments(mesh)
    if vol <= 1e-15:
        box = mesh.aabb()
        log.warning("%s: open or empty mesh, using box inertia", mesh.part_name)
        return box_inertia(box.extents, mass), box.center, True
    com = first / vol
    cov = second - vol * np.outer(com, com)
    inertia = (np.trace(cov) * np.eye(3) - cov) * (mass / vol)
    return 0.5 * (inertia + inertia.T), com, False


def collision_proxy(mesh: TriMesh) -> list[OrientedBox]:
    """The part's AABB in its own frame, carried into the object frame.

    Sub-parts are separate meshes, so they get their own boxes from their own call.
    """
    local = mesh.pose.inverse().apply(mesh.vertices)
    box = aabb_of_points(local)
    return [OrientedBox(mesh.pose.apply(box.center), box.extents / 2.0, mesh.pose.rotation.copy(), mesh.part_name)]


def link_attrs(meshes: list[TriMesh]) -> PhysicalAttrs:
    masses, coms, tensors, warnings = [], [], [], []
    for m in meshes:
        mat = m.material_slots[0] if m.material_slots else None
        mass = estimate_mass(m, mat, shell=not is_closed(m))
        inertia, com, approx = inertia_tensor(m, mass)
        if approx:
            warnings.append(f"{m.part_name}: approximate box inertia")
        masses.append(mass)
        coms.append(com)
        tensors.append(inertia)
    total = float(sum(masses))
    com = np.sum([m * c for m, c in zip(masses, coms)], axis=0) / total
    inertia = np.zeros((3, 3))
    for m, c, it in zip(masses, coms, tensors):
        r = c - com
        inertia += it + m * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
    clamped = float(np.clip(total, MASS_MIN, MASS_MAX))
    if clamped != total:
        inertia *= clamped / total
        warnings.append(f"link mass {total:.3f} kg clamped to {clamped:.3f} kg")
    proxies = [box for m in meshes for box in collision_proxy(m)]
    return PhysicalAttrs(clamped, 0.5 * (inertia + inertia.T), com, proxies, warnings)


# -- joints --------------------------------------------------------------------------


def _door_like(box: Aabb) -> bool:
    e = box.extents
    return bool(e[2] >= e[1] and e[1] <= 0.25 * min(e[0], e[2]))


def _lid_like(box: Aabb, obj: Aabb) -> bool:
    e = box.extents
    top = box.max[2] >= obj.max[2] - 0.05 * obj.extents[2]
    return bool(top and e[2] <= 0.25 * min(e[0], e[1]))


def _drawer_like(box: Aabb, obj: Aabb) -> bool:
    e = box.extents
    front = box.min[1] <= obj.min[1] + 0.1 * obj.extents[1]
    return bool(e[1] >= e[2] and front)


def link_name(path: str) -> str:
    return path.replace("/", "__")


def infer_joints(asset: ObjectAsset, scale=(1.0, 1.0, 1.0)) -> list[JointSpec]:
    """One joint per movable part, joint hint first, then part proportions."""
    scale = np.asarray(scale, dtype=float)
    groups = movable_groups(asset)
    specs = {fp.path: fp for fp in flatten(asset.plan)}
    obj = asset.object_aabb
    joints = []
    for path in [fp.path for fp in flatten(asset.plan) if fp.path in groups]:
        box = union_aabbs(m.aabb() for m in groups[path])
        fp = specs[path]
        hint = fp.spec.joint_hint
        child = link_name(path)
        name = f"{child}_joint"
        if hint is JointHint.SLIDING:
            kind = "slide"
        elif hint is JointHint.HINGED:
            kind = "door" if box.extents[2] >= box.extents[1] else "lid"
        elif _door_like(box):
            kind = "door"
        elif _lid_like(box, obj):
            kind = "lid"
        elif _drawer_like(box, obj):
            kind = "slide"
        else:
            raise UnclassifiableMovable(f"movable part {path} matches no joint pattern")
        if kind == "slide":
            travel = PRISMATIC_TRAVEL * fp.spec.dims[1] * scale[1]
            origin = RigidTransform.from_translation(fp.pose.translation * scale)
            joints.append(JointSpec(name, BASE_LINK, child, JointType.PRISMATIC, origin, (0.0, -1.0, 0.0), (0.0, travel)))
            continue
        # Axis signs make a positive angle swing the part out of the body.
        if kind == "lid":
            pivot = np.array([box.center[0], box.max[1], box.center[2]])
            axis = (-1.0, 0.0, 0.0)
        elif box.center[0] < obj.center[0]:
            pivot = np.array([box.min[0], box.center[1], box.center[2]])
            axis = (0.0, 0.0, -1.0)
        else:
            pivot = np.array([box.max[0], box.center[1], box.center[2]])
            axis = (0.0, 0.0, 1.0)
        origin = RigidTransform.from_translation(pivot)
        joints.append(JointSpec(name, BASE_LINK, child, JointType.REVOLUTE, origin, axis, (0.0, math.pi / 2)))
    return joints


def compile_asset(asset: ObjectAsset, route: Strategy, scale=(1.0, 1.0, 1.0)) -> SimAsset:
    """Rigid routes pack every part into one link; articulated routes give
    each movable part (with its sub-parts) its own link on a star tree."""
    warnings: list[str] = []
    joints: list[JointSpec] = []
    groups: dict = {}
    if route is Strategy.ARTIC:
        try:
            joints = infer_joints(asset, scale)
            groups = movable_groups(asset)
        except UnclassifiableMovable as exc:
            warnings.append(f"{exc}; packaged as a rigid body")
            log.warning("%s: %s", asset.id, exc)
            joints = []
    in_links = {id(m) for ms in groups.values() for m in ms}
    static = [m for m in asset.parts if id(m) not in in_links]
    if not static:
        raise InvalidValue(f"{asset.id}: no static parts left for the base link")
    base = Link(BASE_LINK, static, link_attrs(static))
    movable = []
    for joint in joints:
        path = next(p for p in groups if link_name(p) == joint.child_link)
        meshes = groups[path]
        movable.append(Link(joint.child_link, meshes, link_attrs(meshes)))
    for link in [base, *movable]:
        warnings.extend(link.attrs.warnings)
    return SimAsset(asset.id, base, movable, joints, route, warnings)


def principal_moments_ok(inertia: np.ndarray, tol: float = 1e-12) -> bool:
    w = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
    scale = max(float(np.abs(w).max()), 1e-30)
    if w.min() < -tol * scale:
        return False
    a, b, c = np.sort(w)
    return bool(a + b >= c - tol * scale)
