"""Triangle meshes, materials and the small topology toolbox used by every module."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scenec.core import Aabb, RigidTransform, aabb_of_points
from scenec.errors import InvalidValue

MIN_TRIANGLE_AREA = 1e-12

# Density table in kg/m^3, keyed by material family.
DENSITY = {
    "wood": 700.0,
    "metal": 7800.0,
    "plastic": 1000.0,
    "glass": 2500.0,
    "fabric": 300.0,
    "ceramic": 2300.0,
}

PBR_CHANNELS = ("base_color", "roughness", "metallic", "normal", "alpha", "emission")


def srgb_to_linear(c):
    """Standard sRGB transfer curve, component-wise on [0, 1] values."""
    c = np.asarray(c, dtype=float)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _unit_interval(value, name):
    if value is None:
        return None
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise InvalidValue(f"{name} must lie in [0, 1], got {v}")
    return v


def _color(value, name):
    if value is None:
        return None
    c = tuple(float(v) for v in value)
    if len(c) != 3 or any(not 0.0 <= v <= 1.0 for v in c):
        raise InvalidValue(f"{name} must be an RGB triple in [0, 1], got {value}")
    return c


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    base_color: tuple = (0.8, 0.8, 0.8)
    roughness: float | None = None
    metallic: float | None = None
    normal_map: str | None = None
    alpha: float | None = None
    emission: tuple | None = None
    image_texture: str | None = None
    family: str | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidValue("material name must be non-empty")
        object.__setattr__(self, "base_color", _color(self.base_color, "base_color"))
        object.__setattr__(self, "emission", _color(self.emission, "emission"))
        object.__setattr__(self, "roughness", _unit_interval(self.roughness, "roughness"))
        object.__setattr__(self, "metallic", _unit_interval(self.metallic, "metallic"))
        object.__setattr__(self, "alpha", _unit_interval(self.alpha, "alpha"))
        if self.family is not None and self.family not in DENSITY:
            raise InvalidValue(f"unknown material family {self.family!r}")

    @property
    def resolved_family(self) -> str:
        if self.family:
            return self.family
        lowered = self.name.lower()
        for fam in DENSITY:
            if fam in lowered:
                return fam
        return "plastic"

    @property
    def density(self) -> float:
        return DENSITY[self.resolved_family]

    def present_channels(self) -> tuple[str, ...]:
        present = ["base_color"]
        if self.roughness is not None:
            present.append("roughness")
        if self.metallic is not None:
            present.append("metallic")
        if self.normal_map is not None:
            present.append("normal")
        if self.alpha is not None:
            present.append("alpha")
        if self.emission is not None:
            present.append("emission")
        return tuple(present)

    def to_dict(self) -> dict:
        out = {"name": self.name, "base_color": list(self.base_color)}
        for key in ("roughness", "metallic", "normal_map", "alpha", "image_texture", "family"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.emission is not None:
            out["emission"] = list(self.emission)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialSpec":
        data = dict(data)
        srgb8 = data.pop("base_color_srgb8", None)
        if srgb8 is not None:
            data["base_color"] = tuple(float(v) for v in srgb_to_linear(np.asarray(srgb8, dtype=float) / 255.0))
        if "base_color" in data:
            data["base_color"] = tuple(data["base_color"])
        if data.get("emission") is not None:
            data["emission"] = tuple(data["emission"])
        return cls(**data)


DEFAULT_MATERIAL = MaterialSpec("default_plastic", (0.7, 0.7, 0.7), roughness=0.5)


@dataclass(eq=False)
class TriMesh:
    """A named part mesh.

    ``uv`` holds one 2-vector per triangle corner (shape ``(3F, 2)``).
    ``pose`` is the part's own frame in the object frame; it only matters for
    collision proxies and UV regeneration. ``source`` records how the kernel
    produced the mesh (primitive kind, parameters, applied modifiers); meshes
    loaded from disk have ``source = None``.
    """

    part_name: str
    vertices: np.ndarray
    triangles: np.ndarray
    uv: np.ndarray | None = None
    material_slots: list = field(default_factory=list)
    face_material: np.ndarray | None = None
    pose: RigidTransform = field(default_factory=RigidTransform)
    source: dict | None = None
    plan_part: str | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.uv is not None:
            self.uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
        if self.face_material is None:
            self.face_material = np.zeros(len(self.triangles), dtype=np.int64)
        else:
            self.face_material = np.asarray(self.face_material, dtype=np.int64).reshape(-1)
        self.material_slots = list(self.material_slots)
        if self.plan_part is None:
            self.plan_part = self.part_name

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    def validate(self) -> None:
        """Raise InvalidValue when a structural invariant is broken."""
        n = len(self.vertices)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise InvalidValue(f"{self.part_name}: triangle index out of range")
        if np.any(triangle_areas(self.vertices, self.triangles) <= MIN_TRIANGLE_AREA):
            raise InvalidValue(f"{self.part_name}: degenerate triangle")
        if self.uv is not None and len(self.uv) != 3 * len(self.triangles):
            raise InvalidValue(f"{self.part_name}: uv must have 3 entries per triangle")
        if len(self.face_material) != len(self.triangles):
            raise InvalidValue(f"{self.part_name}: face_material length mismatch")
        if self.material_slots and self.face_material.size and self.face_material.max() >= len(self.material_slots):
            raise InvalidValue(f"{self.part_name}: face material slot out of range")

    def copy(self) -> "TriMesh":
        return TriMesh(
            part_name=self.part_name,
            vertices=self.vertices.copy(),
            triangles=self.triangles.copy(),
            uv=None if self.uv is None else self.uv.copy(),
            material_slots=list(self.material_slots),
            face_material=self.face_material.copy(),
            pose=self.pose,
            source=copy.deepcopy(self.source),
            plan_part=self.plan_part,
        )

    def with_(self, **changes) -> "TriMesh":
        out = self.copy()
        for key, value in changes.items():
            setattr(out, key, value)
        out.__post_init__()
        return out

    def aabb(self) -> Aabb:
        return aabb_of_points(self.vertices)

    def transformed(self, tf: RigidTransform) -> "TriMesh":
        return self.with_(vertices=tf.apply(self.vertices), pose=tf @ self.pose)

    def scaled(self, factors) -> "TriMesh":
        """Axis-wise scaling in the object frame (pose is no longer tracked)."""
        f = np.asarray(factors, dtype=float)
        out = self.with_(vertices=self.vertices * f)
        out.pose = RigidTransform.from_translation(self.pose.translation * f) if _axis_aligned(self.pose) else RigidTransform()
        if out.source is not None:
            out.source = dict(out.source, scaled=True)
        return out

    def equals(self, other: "TriMesh") -> bool:
        """Bit-exact geometric equality."""
        same_uv = (self.uv is None and other.uv is None) or (
            self.uv is not None and other.uv is not None and np.array_equal(self.uv, other.uv)
        )
        return (
            self.part_name == other.part_name
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and same_uv
            and np.array_equal(self.face_material, other.face_material)
            and self.material_slots == other.material_slots
        )


def _axis_aligned(tf: RigidTransform) -> bool:
    return bool(np.allclose(tf.rotation, np.eye(3), atol=1e-12))


# -- topology and measures ---------------------------------------------------


def triangle_areas(vertices, triangles) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0:
        return np.zeros(0)
    cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    return 0.5 * np.linalg.norm(cross, axis=1)


def face_normals(vertices, triangles) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    norm = np.linalg.norm(cross, axis=1, keepdims=True)
    return cross / np.where(norm > 0, norm, 1.0)


def undirected_edges(triangles) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges and the number of faces incident to each."""
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    return edges, counts


def nonmanifold_edge_count(mesh_or_triangles) -> int:
    tris = mesh_or_triangles.triangles if isinstance(mesh_or_triangles, TriMesh) else mesh_or_triangles
    _, counts = undirected_edges(tris)
    return int(np.count_nonzero(counts != 2))


def boundary_edges(triangles) -> np.ndarray:
    """Directed boundary edges (a, b) in the winding of their single face."""
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inverse.reshape(-1)] == 1]


def euler_characteristic(mesh: TriMesh) -> int:
    edges, _ = undirected_edges(mesh.triangles)
    used = np.unique(mesh.triangles)
    return int(len(used) - len(edges) + len(mesh.triangles))


def is_closed(mesh: TriMesh) -> bool:
    _, counts = undirected_edges(mesh.triangles)
    return bool(len(counts) and np.all(counts == 2))


def signed_volume(vertices, triangles) -> float:
    """Sum of signed tetrahedra against the origin."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def surface_area(mesh: TriMesh) -> float:
    return float(triangle_areas(mesh.vertices, mesh.triangles).sum())


def concat_meshes(meshes: Sequence[TriMesh], name: str) -> TriMesh:
    """Concatenate meshes without welding; material slots are merged by name."""
    verts, tris, uvs, fmat, slots = [], [], [], [], []
    slot_index: dict[str, int] = {}
    offset = 0
    have_uv = all(m.uv is not None for m in meshes)
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
        remap = []
        for mat in m.material_slots:
            if mat.name not in slot_index:
                slot_index[mat.name] = len(slots)
                slots.append(mat)
            remap.append(slot_index[mat.name])
        remap = np.asarray(remap or [0], dtype=np.int64)
        fmat.append(remap[m.face_material] if m.material_slots else np.zeros(len(m.triangles), dtype=np.int64))
        if have_uv:
            uvs.append(m.uv)
    return TriMesh(
        part_name=name,
        vertices=np.concatenate(verts) if verts else np.zeros((0, 3)),
        triangles=np.concatenate(tris) if tris else np.zeros((0, 3), dtype=np.int64),
        uv=np.concatenate(uvs) if have_uv and uvs else None,
        material_slots=slots,
        face_material=np.concatenate(fmat) if fmat else None,
    )
