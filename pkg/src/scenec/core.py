"""Shared value types: rigid transforms, boxes, requests and support relations.

Object-local frame convention used everywhere: +x is width (right), +y is
depth (back), -y is the front face, +z is up. The origin of an object frame
sits at the center of its footprint on the ground (z = 0 is the bottom).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from scenec.errors import EmptyInput, InvalidValue

SCHEMA_VERSION = 1

ORTHO_TOL = 1e-9
MIN_DIM = 0.001
MAX_DIM = 20.0


def _frozen_array(values, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise InvalidValue(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValue(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def vec3(values) -> np.ndarray:
    return _frozen_array(values, (3,), "vector")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """A proper rigid motion p -> R p + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # The quaternion this rotation was parsed from, written back verbatim so a
    # JSON round trip is exact (matrix -> quaternion -> matrix drifts in the last ulp).
    source_quat: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3), "rotation")
        trans = _frozen_array(self.translation, (3,), "translation")
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > ORTHO_TOL or np.linalg.det(rot) < 0:
            raise InvalidValue(f"rotation is not a proper orthonormal matrix (err={err:.2e})")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = math.cos(yaw), math.sin(yaw)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), translation)

    @classmethod
    def from_quaternion(cls, quat_xyzw, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        q = np.asarray(quat_xyzw, dtype=float)
        if q.shape != (4,) or np.linalg.norm(q) < 1e-12:
            raise InvalidValue("quaternion must be a non-zero 4-vector (x, y, z, w)")
        return cls(Rotation.from_quat(q / np.linalg.norm(q)).as_matrix(), translation, tuple(float(v) for v in q))

    @classmethod
    def from_matrix(cls, mat) -> "RigidTransform":
        m = np.asarray(mat, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def quaternion(self) -> np.ndarray:
        """Unit quaternion (x, y, z, w) with non-negative w."""
        q = Rotation.from_matrix(self.rotation).as_quat()
        if q[3] < 0:
            q = -q
        return q

    def rpy(self) -> np.ndarray:
        """Fixed-axis roll, pitch, yaw as used by SDF and URDF."""
        return Rotation.from_matrix(self.rotation).as_euler("xyz")

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def apply_vector(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return se3_compose(self, other)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return se3_compose(self, other)

    def is_close(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=tol, rtol=0)
            and np.allclose(self.translation, other.translation, atol=tol, rtol=0)
        )

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def to_dict(self) -> dict:
        rot = list(self.source_quat) if self.source_quat is not None else [float(v) for v in self.quaternion()]
        return {"rotation": rot, "translation": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, data: dict | None) -> "RigidTransform":
        if not data:
            return cls()
        rot = data.get("rotation", [0.0, 0.0, 0.0, 1.0])
        trans = data.get("translation", [0.0, 0.0, 0.0])
        if len(rot) == 4:
            return cls.from_quaternion(rot, trans)
        mat = np.asarray(rot, dtype=float)
        try:
            return cls(mat, trans)
        except InvalidValue:
            return cls(_orthonormalize(mat), trans)

    def to_exact_dict(self) -> dict:
        """Matrix form; survives a JSON round trip bit for bit."""
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


def _orthonormalize(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def se3_compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Return a∘b, i.e. the transform applying b first and then a."""
    rot = a.rotation @ b.rotation
    # Re-project onto SO(3) so long chains of products never drift past the
    # orthonormality tolerance.
    if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-12:
        rot = _orthonormalize(rot)
    return RigidTransform(rot, a.rotation @ b.translation + a.translation)


@dataclass(frozen=True, eq=False)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = _frozen_array(self.min, (3,), "min")
        hi = _frozen_array(self.max, (3,), "max")
        if np.any(lo > hi):
            raise InvalidValue(f"Aabb min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def inflate(self, margin: float) -> "Aabb":
        return Aabb(self.min - margin, self.max + margin)

    def intersects(self, other: "Aabb") -> bool:
        """Closed-box overlap test (touching counts)."""
        return bool(np.all(self.min <= other.max) and np.all(other.min <= self.max))

    def overlap_depth(self, other: "Aabb") -> np.ndarray:
        return np.minimum(self.max, other.max) - np.maximum(self.min, other.min)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.min - tol) & (pts <= self.max + tol), axis=1)

    def corners(self) -> np.ndarray:
        lo, hi = self.min, self.max
        return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])

    def transformed(self, tf: RigidTransform) -> "Aabb":
        return aabb_of_points(tf.apply(self.corners()))

    def is_close(self, other: "Aabb", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.min, other.min, atol=tol, rtol=0) and np.allclose(self.max, other.max, atol=tol, rtol=0))

    def __eq__(self, other):
        if not isinstance(other, Aabb):
            return NotImplemented
        return bool(np.array_equal(self.min, other.min) and np.array_equal(self.max, other.max))

    def __hash__(self):
        return hash((self.min.tobytes(), self.max.tobytes()))

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.min], "max": [float(v) for v in self.max]}

    @classmethod
    def from_dict(cls, data: dict) -> "Aabb":
        return cls(data["min"], data["max"])


def aabb_of_points(points) -> Aabb:
    """Tightest axis-aligned box containing every point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyInput("aabb_of_points needs at least one point")
    pts = pts.reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise InvalidValue("points must be finite")
    return Aabb(pts.min(axis=0), pts.max(axis=0))


def union_aabbs(boxes: Iterable[Aabb]) -> Aabb:
    boxes = list(boxes)
    if not boxes:
        raise EmptyInput("union of zero boxes")
    lo = np.min([b.min for b in boxes], axis=0)
    hi = np.max([b.max for b in boxes], axis=0)
    return Aabb(lo, hi)


class SupportKind(str, Enum):
    GROUND = "ground"
    OBJECT = "object"
    WALL = "wall"
    CEILING = "ceiling"


@dataclass(frozen=True)
class SupportRelation:
    kind: SupportKind = SupportKind.GROUND
    parent_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SupportKind(self.kind))
        if (self.kind is SupportKind.OBJECT) != (self.parent_id is not None):
            raise InvalidValue("parent_id must be set exactly when support kind is 'object'")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.parent_id is not None:
            out["parent_id"] = self.parent_id
        return out

    @classmethod
    def from_dict(cls, data: dict | str | None) -> "SupportRelation":
        if data is None:
            return cls()
        if isinstance(data, str):
            return cls(SupportKind(data))
        return cls(SupportKind(data.get("kind", "ground")), data.get("parent_id"))


def check_dims(dims: Sequence[float], name: str = "target_dims") -> np.ndarray:
    d = _frozen_array(dims, (3,), name)
    if np.any(d < MIN_DIM) or np.any(d > MAX_DIM):
        raise InvalidValue(f"{name} components must lie in [{MIN_DIM}, {MAX_DIM}] m, got {d.tolist()}")
    return d


def dims_valid(dims) -> bool:
    d = np.asarray(dims, dtype=float)
    return bool(d.shape == (3,) and np.all(np.isfinite(d)) and np.all(d >= MIN_DIM) and np.all(d <= MAX_DIM))


@dataclass(frozen=True, eq=False)
class AssetRequest:
    """The room-level contract for one object."""

    id: str
    category: str
    description: str
    target_dims: np.ndarray
    style: str = ""
    placement: RigidTransform = field(default_factory=RigidTransform)
    support: SupportRelation = field(default_factory=SupportRelation)

    def __post_init__(self):
        if not self.id:
            raise InvalidValue("AssetRequest.id must be non-empty")
        object.__setattr__(self, "target_dims", check_dims(self.target_dims))

    def __eq__(self, other):
        if not isinstance(other, AssetRequest):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "description": self.description,
            "target_dims": [float(v) for v in self.target_dims],
            "style": self.style,
            "placement": self.placement.to_dict(),
            "support": self.support.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AssetRequest":
        return cls(
            id=str(data["id"]),
            category=str(data["category"]),
            description=str(data.get("description", "")),
            target_dims=data["target_dims"],
            style=str(data.get("style", "")),
            placement=RigidTransform.from_dict(data.get("placement")),
            support=SupportRelation.from_dict(data.get("support")),
        )
