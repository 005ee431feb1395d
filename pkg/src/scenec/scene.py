"""Placement, support snapping and the persistent house registry."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

from scenec.artic import JointSpec, SimAsset, compile_asset
from scenec.core import Aabb, AssetRequest, RigidTransform, SupportKind, SupportRelation, union_aabbs
from scenec.errors import (
    DegenerateFloor,
    DuplicateId,
    InvalidOverridePath,
    InvalidValue,
    NoSupportHit,
    ParseError,
    SchemaError,
    UnknownId,
    UnresolvedSupport,
    VersionMismatch,
)
from scenec.kernel.objio import load_obj, write_text
from scenec.kernel.raycast import first_hit
from scenec.plan import ObjectPlan, get_value, set_path
from scenec.program import LoopBudgets, ObjectAsset, PartProgram
from scenec.router import CategoryOntology, Strategy
from scenec.sdf import MTL_NAME, mesh_uri, publish_asset_dir

log = logging.getLogger(__name__)

HOUSE_SCHEMA_VERSION = 1
SNAP_RANGE = 2.0
DEFAULT_WALL_HEIGHT = 2.7
ASSET_DIR = "assets"


# -- rooms -------------------------------------------------------------------------


@dataclass(frozen=True)
class Opening:
    """A door or window in wall ``wall_segment`` (edge i -> i+1 of the floor
    polygon). ``offset`` is the distance of its center from the edge start;
    None centers it on the edge."""

    kind: str
    wall_segment: int
    width: float
    height: float
    sill_height: float = 0.0
    offset: float | None = None

    def __post_init__(self):
        if self.kind not in ("door", "window"):
            raise InvalidValue(f"opening kind must be door or window, got {self.kind!r}")
        if self.width <= 0 or self.height <= 0 or self.sill_height < 0:
            raise InvalidValue("opening width and height must be positive and sill non-negative")

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "wall_segment": self.wall_segment,
            "width": self.width,
            "height": self.height,
            "sill_height": self.sill_height,
        }
        if self.offset is not None:
            out["offset"] = self.offset
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Opening":
        return cls(
            data["kind"],
            int(data["wall_segment"]),
            float(data["width"]),
            float(data["height"]),
            float(data.get("sill_height", 0.0)),
            data.get("offset"),
        )


@dataclass(frozen=True)
class Room:
    name: str
    floor_polygon: tuple
    wall_height: float = DEFAULT_WALL_HEIGHT
    openings: tuple = ()

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.floor_polygon)
        object.__setattr__(self, "floor_polygon", pts)
        object.__setattr__(self, "openings", tuple(self.openings))
        if len(pts) < 3:
            raise DegenerateFloor(f"room {self.name}: floor polygon needs at least 3 vertices")
        poly = Polygon(pts)
        if poly.area <= 1e-9:
            raise DegenerateFloor(f"room {self.name}: floor polygon has zero area")
        if not poly.exterior.is_simple:
            raise InvalidValue(f"room {self.name}: floor polygon self-intersects")
        if not poly.exterior.is_ccw:
            raise InvalidValue(f"room {self.name}: floor polygon must be counter-clockwise")
        if self.wall_height <= 0:
            raise InvalidValue(f"room {self.name}: wall height must be positive")
        for op in self.openings:
            if not 0 <= op.wall_segment < len(pts):
                raise InvalidValue(f"room {self.name}: opening on unknown wall {op.wall_segment}")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.floor_polygon)

    def wall(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Start, end and inward unit normal of wall ``i``."""
        a = np.array(self.floor_polygon[i])
        b = np.array(self.floor_polygon[(i + 1) % len(self.floor_polygon)])
        d = (b - a) / np.linalg.norm(b - a)
        return a, b, np.array([-d[1], d[0]])

    def contains(self, xy) -> bool:
        return bool(shapely.contains_xy(self.polygon, float(xy[0]), float(xy[1])))

    def nearest_wall(self, xy) -> int:
        p = Point(float(xy[0]), float(xy[1]))
        n = len(self.floor_polygon)
        dists = [LineString([self.floor_polygon[i], self.floor_polygon[(i + 1) % n]]).distance(p) for i in range(n)]
        return int(np.argmin(dists))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "floor_polygon": [list(p) for p in self.floor_polygon],
            "wall_height": self.wall_height,
            "openings": [o.to_dict() for o in self.openings],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Room":
        return cls(
            str(data["name"]),
            tuple(tuple(p) for p in data["floor_polygon"]),
            float(data.get("wall_height", DEFAULT_WALL_HEIGHT)),
            tuple(Opening.from_dict(o) for o in data.get("openings", [])),
        )


def rectangular_room(name: str, width: float, depth: float, wall_height: float = DEFAULT_WALL_HEIGHT, openings=()) -> Room:
    """Axis-aligned room with its floor centered on the origin."""
    w, d = width / 2.0, depth / 2.0
    return Room(name, ((-w, -d), (w, -d), (w, d), (-w, d)), wall_height, tuple(openings))


# -- scene objects -----------------------------------------------------------------------


@dataclass(eq=False)
class SceneObject:
    id: str
    request: AssetRequest
    plan: dict
    programs: list
    geometry_paths: list
    sdf_path: str
    world_bbox: Aabb
    transform: RigidTransform
    support: SupportRelation
    joints: list
    scale: np.ndarray
    route: Strategy
    local_bbox: Aabb
    room: str | None = None
    urdf_path: str = ""
    _meshes: list | None = field(default=None, repr=False)

    @property
    def object_plan(self) -> ObjectPlan:
        return ObjectPlan.from_dict(self.plan)

    @property
    def category(self) -> str:
        return self.request.category

    def world_meshes(self, root: Path | None = None) -> list:
        """Part meshes in world coordinates (loaded from disk on first use)."""
        if self._meshes is None:
            if root is None:
                raise InvalidValue(f"object {self.id}: meshes not loaded and no house root given")
            meshes = []
            for rel in self.geometry_paths:
                path = Path(root) / rel
                meshes.extend(load_obj(path, path.parent.parent / MTL_NAME))
            self._meshes = [m.transformed(self.transform) for m in meshes]
        return self._meshes

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "request": self.request.to_dict(),
            "route": self.route.value,
            "plan": self.plan,
            "programs": [p.to_dict() for p in self.programs],
            "geometry_paths": list(self.geometry_paths),
            "sdf_path": self.sdf_path,
            "urdf_path": self.urdf_path,
            "world_bbox": self.world_bbox.to_dict(),
            "local_bbox": self.local_bbox.to_dict(),
            "transform": self.transform.to_exact_dict(),
            "support": self.support.to_dict(),
            "joints": [j.to_dict() for j in self.joints],
            "scale": [float(v) for v in self.scale],
            "room": self.room,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneObject":
        return cls(
            id=data["id"],
            request=AssetRequest.from_dict(data["request"]),
            plan=data["plan"],
            programs=[PartProgram.from_dict(p) for p in data.get("programs", [])],
            geometry_paths=list(data["geometry_paths"]),
            sdf_path=data["sdf_path"],
            world_bbox=Aabb.from_dict(data["world_bbox"]),
            transform=RigidTransform.from_dict(data["transform"]),
            support=SupportRelation.from_dict(data["support"]),
            joints=[JointSpec.from_dict(j) for j in data.get("joints", [])],
            scale=np.asarray(data["scale"], dtype=float),
            route=Strategy(data["route"]),
            local_bbox=Aabb.from_dict(data["local_bbox"]),
            room=data.get("room"),
            urdf_path=data.get("urdf_path", ""),
        )

    def __eq__(self, other):
        if not isinstance(other, SceneObject):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(eq=False)
class HouseState:
    rooms: list = field(default_factory=list)
    objects: dict = field(default_factory=dict)
    version: int = 0
    root: Path | None = None

    def room(self, name: str) -> Room:
        for r in self.rooms:
            if r.name == name:
                return r
        raise UnknownId(f"no room named {name!r}")

    def room_at(self, xy) -> Room | None:
        for r in self.rooms:
            if r.contains(xy):
                return r
        return None

    def get(self, obj_id: str) -> SceneObject:
        try:
            return self.objects[obj_id]
        except KeyError:
            raise UnknownId(f"no object with id {obj_id!r}") from None

    def to_dict(self) -> dict:
        return {
            "schema_version": HOUSE_SCHEMA_VERSION,
            "version": self.version,
            "rooms": [r.to_dict() for r in self.rooms],
            "objects": [o.to_dict() for o in self.objects.values()],
        }

    @classmethod
    def from_dict(cls, data: dict, root: Path | None = None) -> "HouseState":
        schema = int(data.get("schema_version", HOUSE_SCHEMA_VERSION))
        if schema > HOUSE_SCHEMA_VERSION:
            raise VersionMismatch(f"house file schema {schema} is newer than supported ({HOUSE_SCHEMA_VERSION})")
        objects = {}
        for od in data.get("objects", []):
            obj = SceneObject.from_dict(od)
            if obj.id in objects:
                raise DuplicateId(f"house file lists {obj.id!r} twice")
            objects[obj.id] = obj
        house = cls([Room.from_dict(r) for r in data.get("rooms", [])], objects, int(data.get("version", 0)), root)
        for obj in objects.values():
            if obj.support.kind is SupportKind.OBJECT and obj.support.parent_id not in objects:
                raise UnresolvedSupport(f"{obj.id}: support parent {obj.support.parent_id!r} is not in the house")
        return house

    def __eq__(self, other):
        if not isinstance(other, HouseState):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def save_house(house: HouseState, path: str | Path) -> None:
    """Atomic write (temp file then rename)."""
    write_text(Path(path), json.dumps(house.to_dict(), indent=2, sort_keys=True) + "\n")


def load_house(path: str | Path) -> HouseState:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return HouseState.from_dict(data, path.parent.resolve())
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidValue):
            raise
        raise SchemaError(f"{path}: malformed house file: {exc!r}") from exc


def register(house: HouseState, obj: SceneObject) -> HouseState:
    """New house with ``obj`` added; the input house is never modified."""
    if obj.id in house.objects:
        raise DuplicateId(f"object id {obj.id!r} is already registered")
    return HouseState(list(house.rooms), {**house.objects, obj.id: obj}, house.version + 1, house.root)


# -- placement -------------------------------------------------------------------------


@dataclass
class Placement:
    obj: SceneObject
    sim: SimAsset
    asset: ObjectAsset


def scale_factors(extents, target) -> np.ndarray:
    ext = np.asarray(extents, dtype=float)
    return np.where(ext > 1e-12, np.asarray(target, dtype=float) / np.where(ext > 1e-12, ext, 1.0), 1.0)


def scale_asset(asset: ObjectAsset, factors) -> ObjectAsset:
    parts = [m.scaled(factors) for m in asset.parts]
    stats = dict(asset.stats, scale=[float(f) for f in factors])
    return ObjectAsset(asset.id, asset.plan, parts, union_aabbs(m.aabb() for m in parts), asset.programs, stats)


def _yaw_facing(outward: np.ndarray) -> RigidTransform:
    """Rotation about z taking local +y (the back) onto ``outward``."""
    return RigidTransform.from_yaw(math.atan2(-outward[0], outward[1]))


def _snap(
    meshes: list,
    tf: RigidTransform,
    support: SupportRelation,
    house: HouseState,
) -> tuple[RigidTransform, str | None]:
    """Translate (and for walls, turn) ``tf`` so the object touches its support."""
    world = np.vstack([tf.apply(m.vertices) for m in meshes])
    lo, hi = world.min(axis=0), world.max(axis=0)
    center = (lo + hi) / 2.0
    room = house.room_at(center[:2])
    kind = support.kind
    if kind is SupportKind.OBJECT:
        if support.parent_id not in house.objects:
            raise UnresolvedSupport(f"support parent {support.parent_id!r} is not registered (parents must be placed first)")
        parent = house.objects[support.parent_id]
        start = np.array([center[0], center[1], lo[2] + SNAP_RANGE])
        t = first_hit(start, (0.0, 0.0, -1.0), parent.world_meshes(house.root), 2 * SNAP_RANGE, facing="against")
        if t is None:
            raise NoSupportHit(f"no surface of {parent.id} below the object within {SNAP_RANGE} m")
        top = start[2] - t
        return RigidTransform(tf.rotation, tf.translation + [0.0, 0.0, top - lo[2]]), parent.room
    if room is None:
        raise NoSupportHit(f"object center {center[:2].round(3).tolist()} is outside every room")
    if kind is SupportKind.GROUND:
        gap = lo[2]
        if abs(gap) > SNAP_RANGE:
            raise NoSupportHit(f"floor is {gap:.3f} m from the object bottom")
        return RigidTransform(tf.rotation, tf.translation - [0.0, 0.0, gap]), room.name
    if kind is SupportKind.CEILING:
        gap = room.wall_height - hi[2]
        if abs(gap) > SNAP_RANGE:
            raise NoSupportHit(f"ceiling is {gap:.3f} m from the object top")
        return RigidTransform(tf.rotation, tf.translation + [0.0, 0.0, gap]), room.name
    # Wall: back (+y) faces the nearest wall, front faces into the room.
    i = room.nearest_wall(center[:2])
    a, b, inward = room.wall(i)
    outward = np.array([-inward[0], -inward[1], 0.0])
    turned = RigidTransform(_yaw_facing(outward[:2]).rotation, tf.translation)
    world = np.vstack([turned.apply(m.vertices) for m in meshes])
    c = (world.min(axis=0) + world.max(axis=0)) / 2.0
    along = np.dot(c[:2] - a, (b - a) / np.linalg.norm(b - a))
    if not 0.0 <= along <= np.linalg.norm(b - a):
        raise NoSupportHit(f"wall {i} of {room.name} is not behind the object")
    back = float((world @ outward).max())
    gap = float(np.dot(a, outward[:2])) - back
    if abs(gap) > SNAP_RANGE:
        raise NoSupportHit(f"wall is {gap:.3f} m behind the object")
    return RigidTransform(turned.rotation, turned.translation + gap * outward), room.name


def place_object(asset: ObjectAsset, req: AssetRequest, house: HouseState, strategy: Strategy) -> Placement:
    """Scale to the requested dims, compile, pose, and snap onto the support."""
    factors = scale_factors(asset.object_aabb.extents, req.target_dims)
    scaled = scale_asset(asset, factors)
    sim = compile_asset(scaled, strategy, factors)
    tf, room = _snap(scaled.parts, req.placement, req.support, house)
    world = [m.transformed(tf) for m in scaled.parts]
    obj = SceneObject(
        id=req.id,
        request=req,
        plan=asset.plan.to_dict(),
        programs=list(asset.programs),
        geometry_paths=[],
        sdf_path="",
        world_bbox=union_aabbs(m.aabb() for m in world),
        transform=tf,
        support=req.support,
        joints=list(sim.joints),
        scale=factors,
        route=strategy,
        local_bbox=scaled.object_aabb,
        room=room,
        _meshes=world,
    )
    return Placement(obj, sim, scaled)


# -- files -------------------------------------------------------------------------------


def _rel(path: Path, root: Path) -> str:
    return Path(os.path.relpath(path, root)).as_posix()


def write_object(placement: Placement, root: str | Path) -> SceneObject:
    """Write the object's asset directory under ``root/assets`` by building it
    beside the final location and swapping it in, then fill in the paths."""
    root = Path(root)
    final = publish_asset_dir(root / ASSET_DIR, placement.sim, placement.asset)
    return replace(
        placement.obj,
        geometry_paths=[_rel(final / mesh_uri(link.name), root) for link in placement.sim.links],
        sdf_path=_rel(final / "model.sdf", root),
        urdf_path=_rel(final / "model.urdf", root),
    )


def add_object(house: HouseState, placement: Placement) -> HouseState:
    if house.root is None:
        raise InvalidValue("house has no root directory for asset files")
    if placement.obj.id in house.objects:
        raise DuplicateId(f"object id {placement.obj.id!r} is already registered")
    return register(house, write_object(placement, house.root))


def regenerate(
    house: HouseState,
    obj_id: str,
    overrides: dict,
    backend,
    ont: CategoryOntology,
    budgets: LoopBudgets = LoopBudgets(),
) -> HouseState:
    """Rebuild one object after editing its stored plan. Nothing is written
    unless the rebuild succeeds; a no-op edit writes nothing at all."""
    from scenec.pipeline import build_plan

    obj = house.get(obj_id)
    data = obj.plan
    changed = False
    for path, value in overrides.items():
        if get_value(data, path) != value:
            changed = True
        data = set_path(data, path, value)
    if not changed:
        return house
    try:
        plan = ObjectPlan.from_dict(data)
    except (SchemaError, InvalidValue) as exc:
        raise InvalidOverridePath(f"override produces an invalid plan: {exc}") from exc
    result = build_plan(plan, obj.request, obj.route, backend, ont, budgets)
    others = {k: v for k, v in house.objects.items() if k != obj_id}
    placement = place_object(result.asset, obj.request, replace_objects(house, others), obj.route)
    new_obj = write_object(placement, house.root)
    objects = {k: (new_obj if k == obj_id else v) for k, v in house.objects.items()}
    return HouseState(list(house.rooms), objects, house.version + 1, house.root)


def replace_objects(house: HouseState, objects: dict) -> HouseState:
    return HouseState(list(house.rooms), dict(objects), house.version, house.root)
