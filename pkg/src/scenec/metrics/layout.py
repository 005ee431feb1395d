"""Scene-level plausibility metrics over a placed house."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import ndimage

from scenec.core import SupportKind
from scenec.errors import DegenerateFloor, UnknownRelationType
from scenec.kernel.mesh import boundary_edges, face_normals, nonmanifold_edge_count, triangle_areas
from scenec.kernel.raycast import first_hit
from scenec.router import Strategy

PENETRATION_TOL = 0.001
OOB_PERCENT = 99
OOB_EDGE_TOL = 1e-6
NAV_CELL = 0.05
SUPPORT_TOL = 0.005
ACC_DEPTH = 0.6
ACC_PERCENT = 80
OPC_DEPTH = 0.75
NEXT_TO_GAP = 0.5
AGAINST_WALL_GAP = 0.05
TRI_CHUNK = 200_000


# -- collisions -----------------------------------------------------------------------


def _tri_boxes(v: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    corners = v[t]
    return corners.min(axis=1), corners.max(axis=1)


def _plane_dist(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Signed distances of ``pts`` (n,3,3) to the planes of ``tri`` (n,3,3)."""
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    n /= np.maximum(np.linalg.norm(n, axis=1), 1e-300)[:, None]
    return np.einsum("nkj,nj->nk", pts - tri[:, None, 0], n)


def _straddles(d: np.ndarray) -> np.ndarray:
    return (d.max(axis=1) > PENETRATION_TOL) & (d.min(axis=1) < -PENETRATION_TOL)


def _line_interval(tri: np.ndarray, d: np.ndarray, axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Extent, projected on ``axis``, of where each triangle crosses the other plane."""
    proj = np.einsum("nkj,nj->nk", tri, axis)
    vals = np.full((len(tri), 6), np.nan)
    for k in range(3):
        i, j = k, (k + 1) % 3
        cross = d[:, i] * d[:, j] < 0
        s = np.where(cross, d[:, i] / np.where(cross, d[:, i] - d[:, j], 1.0), 0.0)
        vals[:, k] = np.where(cross, proj[:, i] + s * (proj[:, j] - proj[:, i]), np.nan)
        vals[:, 3 + k] = np.where(d[:, k] == 0, proj[:, k], np.nan)
    return np.nanmin(vals, axis=1), np.nanmax(vals, axis=1)


def triangles_penetrate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise test over (n,3,3) triangle arrays. A pair counts only when each
    triangle passes through the other's plane by more than the contact tolerance,
    so faces resting on each other never register."""
    da = _plane_dist(b, a)
    db = _plane_dist(a, b)
    ok = _straddles(da) & _straddles(db)
    out = np.zeros(len(a), dtype=bool)
    if not ok.any():
        return out
    a, b, da, db = a[ok], b[ok], da[ok], db[ok]
    na = np.cross(a[:, 1] - a[:, 0], a[:, 2] - a[:, 0])
    nb = np.cross(b[:, 1] - b[:, 0], b[:, 2] - b[:, 0])
    axis = np.cross(na, nb)
    lo_a, hi_a = _line_interval(a, da, axis)
    lo_b, hi_b = _line_interval(b, db, axis)
    out[np.flatnonzero(ok)] = np.maximum(lo_a, lo_b) <= np.minimum(hi_a, hi_b)
    return out


def meshes_penetrate(m1, m2) -> bool:
    box1, box2 = m1.aabb(), m2.aabb()
    if not box1.intersects(box2):
        return False
    lo1, hi1 = _tri_boxes(m1.vertices, m1.triangles)
    lo2, hi2 = _tri_boxes(m2.vertices, m2.triangles)
    # Only triangles reaching into the other mesh's box can touch it.
    s1 = np.flatnonzero(np.all(hi1 >= box2.min, axis=1) & np.all(lo1 <= box2.max, axis=1))
    s2 = np.flatnonzero(np.all(hi2 >= box1.min, axis=1) & np.all(lo2 <= box1.max, axis=1))
    if len(s1) == 0 or len(s2) == 0:
        return False
    step = max(1, TRI_CHUNK // len(s2))
    for start in range(0, len(s1), step):
        i = s1[start : start + step]
        ii = np.repeat(i, len(s2))
        jj = np.tile(s2, len(i))
        near = np.all(hi1[ii] >= lo2[jj], axis=1) & np.all(lo1[ii] <= hi2[jj], axis=1)
        ii, jj = ii[near], jj[near]
        if len(ii) and triangles_penetrate(m1.vertices[m1.triangles[ii]], m2.vertices[m2.triangles[jj]]).any():
            return True
    return False


def _closed(mesh) -> bool:
    return len(mesh.triangles) > 0 and nonmanifold_edge_count(mesh) == 0 and len(boundary_edges(mesh.triangles)) == 0


def winding_numbers(points: np.ndarray, mesh) -> np.ndarray:
    """Generalized winding number of a closed mesh around each point (1 inside, 0 outside)."""
    verts = mesh.vertices[mesh.triangles]
    out = np.empty(len(points))
    step = max(1, TRI_CHUNK // max(1, len(verts)))
    for start in range(0, len(points), step):
        tri = verts[None] - points[start : start + step, None, None, :]
        a, b, c = tri[:, :, 0], tri[:, :, 1], tri[:, :, 2]
        la, lb, lc = (np.linalg.norm(x, axis=2) for x in (a, b, c))
        dot = lambda x, y: np.einsum("pij,pij->pi", x, y)  # noqa: E731
        num = dot(a, np.cross(b, c))
        den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb
        out[start : start + step] = np.arctan2(num, den).sum(axis=1) / (2 * math.pi)
    return out


def surface_probes(mesh) -> np.ndarray:
    """Face centroids pushed inward by the contact tolerance."""
    tri = mesh.vertices[mesh.triangles]
    n = face_normals(mesh.vertices, mesh.triangles)
    return tri.mean(axis=1) - n * PENETRATION_TOL


def probes_inside(inner, outer) -> bool:
    """Whether some surface probe of closed ``inner`` lies within closed ``outer``.

    This catches overlaps whose faces are flush with each other, where no
    triangle passes through another's plane."""
    if not (_closed(inner) and _closed(outer)) or not outer.aabb().intersects(inner.aabb()):
        return False
    pts = surface_probes(inner)
    box = outer.aabb()
    pts = pts[np.all((pts > box.min) & (pts < box.max), axis=1)]
    return bool(len(pts)) and bool((winding_numbers(pts, outer) > 0.5).any())


def objects_collide(meshes_a, meshes_b) -> bool:
    for ma in meshes_a:
        for mb in meshes_b:
            if meshes_penetrate(ma, mb) or probes_inside(ma, mb) or probes_inside(mb, ma):
                return True
    return False


def collision_metric(house) -> tuple[float, list[tuple[str, str]]]:
    ids = sorted(house.objects)
    if not ids:
        return 0.0, []
    meshes = {i: house.objects[i].world_meshes(house.root) for i in ids}
    pairs = []
    for n, a in enumerate(ids):
        for b in ids[n + 1 :]:
            if house.objects[a].world_bbox.intersects(house.objects[b].world_bbox) and objects_collide(meshes[a], meshes[b]):
                pairs.append((a, b))
    hit = {i for p in pairs for i in p}
    return len(hit) / len(ids), pairs


# -- out of bounds ---------------------------------------------------------------------


def sample_seed(obj_id: str, seed: int = 0) -> int:
    return (zlib.crc32(obj_id.encode("utf-8")) + int(seed)) % 2**32


def sample_points(meshes, n: int, seed: int) -> np.ndarray:
    """``n`` surface points drawn with probability proportional to triangle area."""
    verts = [m.vertices[m.triangles] for m in meshes if len(m.triangles)]
    if not verts:
        return np.zeros((0, 3))
    tri = np.concatenate(verts)
    area = np.concatenate([triangle_areas(m.vertices, m.triangles) for m in meshes if len(m.triangles)])
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(tri), size=n, p=area / area.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u, v = np.where(flip, 1 - u, u), np.where(flip, 1 - v, v)
    t = tri[idx]
    return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])


def floor_hits(rooms, xy: np.ndarray) -> np.ndarray:
    """Whether straight-down rays from ``xy`` land on some room floor; points within
    the edge tolerance of a floor boundary count as landing."""
    hit = np.zeros(len(xy), dtype=bool)
    for room in rooms:
        poly = room.polygon
        inside = shapely.contains_xy(poly, xy[:, 0], xy[:, 1])
        near = shapely.distance(poly.exterior, shapely.points(xy)) <= OOB_EDGE_TOL
        hit |= inside | near
    return hit


def oob_flagged(hits: int, total: int) -> bool:
    """Out of bounds iff fewer than 99% of the rays land on the floor."""
    return hits * 100 < OOB_PERCENT * total


def oob_metric(house, samples_per_object: int = 256, seed: int = 0) -> tuple[float, list[str]]:
    ids = sorted(house.objects)
    if not ids:
        return 0.0, []
    flagged = []
    for i in ids:
        pts = sample_points(house.objects[i].world_meshes(house.root), samples_per_object, sample_seed(i, seed))
        if len(pts) and oob_flagged(int(floor_hits(house.rooms, pts[:, :2]).sum()), len(pts)):
            flagged.append(i)
    return len(flagged) / len(ids), flagged


# -- navigability ------------------------------------------------------------------------


@dataclass
class FloorGrid:
    origin: np.ndarray
    cell: float
    floor: np.ndarray
    free: np.ndarray
    labels: np.ndarray = field(repr=False)
    largest: int

    @property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.floor.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.cell
        return np.meshgrid(xs, ys)

    @property
    def nav(self) -> float:
        total = int(self.free.sum())
        if total == 0:
            return 0.0
        return float((self.labels == self.largest).sum()) / total


def is_obstacle(obj) -> bool:
    """Rugs and other thin covers are walked over; ceiling fixtures hang above head height."""
    return obj.route is not Strategy.THIN_COVER and obj.support.kind is not SupportKind.CEILING


def footprint(obj) -> tuple[np.ndarray, np.ndarray]:
    return obj.world_bbox.min[:2], obj.world_bbox.max[:2]


def floor_grid(house, cell: float = NAV_CELL) -> FloorGrid:
    if not house.rooms:
        raise DegenerateFloor("house has no rooms")
    pts = np.array([p for r in house.rooms for p in r.floor_polygon])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    nx, ny = (int(math.ceil((hi[k] - lo[k]) / cell - 1e-9)) for k in (0, 1))
    xs = lo[0] + (np.arange(nx) + 0.5) * cell
    ys = lo[1] + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    floor = np.zeros(gx.shape, dtype=bool)
    for room in house.rooms:
        floor |= shapely.contains_xy(room.polygon, gx, gy)
    if not floor.any():
        raise DegenerateFloor("no grid cell center lies on a floor")
    free = floor.copy()
    for obj in house.objects.values():
        if is_obstacle(obj):
            a, b = footprint(obj)
            free &= ~((gx > a[0]) & (gx < b[0]) & (gy > a[1]) & (gy < b[1]))
    labels, count = ndimage.label(free)
    largest = 0
    if count:
        sizes = np.bincount(labels.ravel())[1:]
        largest = int(np.argmax(sizes)) + 1
    return FloorGrid(lo, cell, floor, free, labels, largest)


def nav_metric(house, cell: float = NAV_CELL) -> float:
    return floor_grid(house, cell).nav


# -- support -----------------------------------------------------------------------------


def _vertices(obj, root) -> np.ndarray:
    return np.vstack([m.vertices for m in obj.world_meshes(root)])


def support_gap(obj, house) -> float | None:
    """Distance from the object's support-facing side to its declared support
    (negative when sunk in). None when no surface of that kind is within reach."""
    box = obj.world_bbox
    kind = obj.support.kind
    if kind is SupportKind.GROUND:
        return float(box.min[2])
    if kind is SupportKind.OBJECT:
        parent = house.objects.get(obj.support.parent_id)
        if parent is None:
            return None
        c = box.center
        start = (c[0], c[1], box.min[2] + SUPPORT_TOL)
        t = first_hit(start, (0.0, 0.0, -1.0), parent.world_meshes(house.root), 2 * SUPPORT_TOL, facing="against")
        return None if t is None else t - SUPPORT_TOL
    room = house.room(obj.room) if obj.room else house.room_at(box.center[:2])
    if room is None:
        return None
    if kind is SupportKind.CEILING:
        return float(room.wall_height - box.max[2])
    a, b, inward = room.wall(room.nearest_wall(box.center[:2]))
    outward = -inward
    back = float((_vertices(obj, house.root)[:, :2] @ outward).max())
    return float(np.dot(a, outward)) - back


def support_metric(house) -> tuple[float, list[str]]:
    ids = sorted(house.objects)
    if not ids:
        return 1.0, []
    unsupported = []
    for i in ids:
        gap = support_gap(house.objects[i], house)
        if gap is None or abs(gap) > SUPPORT_TOL:
            unsupported.append(i)
    return 1.0 - len(unsupported) / len(ids), unsupported


# -- accessibility -----------------------------------------------------------------------


def side_band(obj, side: str) -> np.ndarray:
    """World corners of the clearance band in front of one side of the object."""
    lo, hi = obj.local_bbox.min, obj.local_bbox.max
    if side == "front":
        quad = [(lo[0], lo[1] - ACC_DEPTH), (hi[0], lo[1] - ACC_DEPTH), (hi[0], lo[1]), (lo[0], lo[1])]
    elif side == "back":
        quad = [(lo[0], hi[1]), (hi[0], hi[1]), (hi[0], hi[1] + ACC_DEPTH), (lo[0], hi[1] + ACC_DEPTH)]
    elif side == "left":
        quad = [(hi[0], lo[1]), (hi[0] + ACC_DEPTH, lo[1]), (hi[0] + ACC_DEPTH, hi[1]), (hi[0], hi[1])]
    else:
        quad = [(lo[0] - ACC_DEPTH, lo[1]), (lo[0], lo[1]), (lo[0], hi[1]), (lo[0] - ACC_DEPTH, hi[1])]
    pts = np.array([(x, y, 0.0) for x, y in quad])
    return obj.transform.apply(pts)[:, :2]


def side_accessible(grid: FloorGrid, quad: np.ndarray) -> bool:
    """At least 80% of the lattice cells under the band must be free and in the
    main walkable region. The lattice continues past the floor so that cells
    behind walls count as blocked."""
    lo, hi = quad.min(axis=0), quad.max(axis=0)
    first = np.floor((lo - grid.origin) / grid.cell - 0.5).astype(int)
    last = np.ceil((hi - grid.origin) / grid.cell - 0.5).astype(int)
    ii = np.arange(first[0], last[0] + 1)
    jj = np.arange(first[1], last[1] + 1)
    gi, gj = np.meshgrid(ii, jj)
    gx = grid.origin[0] + (gi + 0.5) * grid.cell
    gy = grid.origin[1] + (gj + 0.5) * grid.cell
    mask = shapely.contains_xy(shapely.Polygon(quad), gx, gy)
    n = int(mask.sum())
    if n == 0:
        return False
    ny, nx = grid.free.shape
    ci, cj = gi[mask], gj[mask]
    on_grid = (ci >= 0) & (ci < nx) & (cj >= 0) & (cj < ny)
    ci, cj = ci[on_grid], cj[on_grid]
    good = int((grid.free[cj, ci] & (grid.labels[cj, ci] == grid.largest)).sum())
    return good * 100 >= ACC_PERCENT * n


def accessibility_metric(house, ont, grid: FloorGrid | None = None) -> tuple[float | None, list[str]]:
    """Share of floor-standing objects with declared functional sides whose sides
    are all reachable. Objects resting on furniture are not judged on the floor grid."""
    grid = grid or floor_grid(house)
    judged, blocked = 0, []
    for i in sorted(house.objects):
        obj = house.objects[i]
        entry = ont.lookup(obj.category)
        if entry is None or not entry.functional_sides or obj.world_bbox.min[2] > SUPPORT_TOL:
            continue
        judged += 1
        if not all(side_accessible(grid, side_band(obj, s)) for s in entry.functional_sides):
            blocked.append(i)
    if judged == 0:
        return None, []
    return 1.0 - len(blocked) / judged, blocked


# -- opening clearance -------------------------------------------------------------------


def clearance_box(room, opening) -> tuple[np.ndarray, float, float]:
    """Floor quad and z range of the space kept clear in front of an opening."""
    a, b, inward = room.wall(opening.wall_segment)
    length = float(np.linalg.norm(b - a))
    u = (b - a) / length
    mid = length / 2.0 if opening.offset is None else float(opening.offset)
    p0 = a + u * (mid - opening.width / 2.0)
    p1 = a + u * (mid + opening.width / 2.0)
    quad = np.array([p0, p1, p1 + inward * OPC_DEPTH, p0 + inward * OPC_DEPTH])
    return quad, opening.sill_height, opening.sill_height + opening.height


def _boxes_overlap_2d(quad: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Separating-axis test between a rectangle and an axis-aligned box, strict overlap."""
    rect = np.array([lo, (hi[0], lo[1]), hi, (lo[0], hi[1])])
    edges = [quad[1] - quad[0], quad[3] - quad[0]]
    axes = [np.array([1.0, 0.0]), np.array([0.0, 1.0])] + [np.array([-e[1], e[0]]) for e in edges]
    for ax in axes:
        p, q = quad @ ax, rect @ ax
        if min(p.max(), q.max()) - max(p.min(), q.min()) <= 1e-12 * max(1.0, np.abs(ax).max()):
            return False
    return True


def opening_blocked(room, opening, objects) -> bool:
    quad, z0, z1 = clearance_box(room, opening)
    for obj in objects:
        if obj.route is Strategy.THIN_COVER:
            continue
        box = obj.world_bbox
        if min(box.max[2], z1) - max(box.min[2], z0) <= 0:
            continue
        if _boxes_overlap_2d(quad, box.min[:2], box.max[:2]):
            return True
    return False


def opening_clearance_metric(house) -> tuple[float | None, list[tuple[str, int]]]:
    """Fraction of openings whose clearance box is blocked; None without openings."""
    total, blocked = 0, []
    objects = list(house.objects.values())
    for room in house.rooms:
        for k, op in enumerate(room.openings):
            total += 1
            if opening_blocked(room, op, objects):
                blocked.append((room.name, k))
    if total == 0:
        return None, []
    return len(blocked) / total, blocked


# -- relations ---------------------------------------------------------------------------


RELATION_TYPES = (
    "in_front_of",
    "behind",
    "left_of",
    "right_of",
    "next_to",
    "above",
    "on_top_of",
    "against_wall",
    "in_middle_of_room",
    "faces",
)


def _local_center(subject, reference) -> np.ndarray:
    return reference.transform.inverse().apply(subject.world_bbox.center[None])[0]


def _reach(box, u: np.ndarray) -> float:
    h = box.extents[:2] / 2.0
    return float(abs(u[0]) * h[0] + abs(u[1]) * h[1])


def _ray_hits_box_2d(origin, direction, lo, hi) -> bool:
    t0, t1 = 0.0, math.inf
    for k in range(2):
        if abs(direction[k]) < 1e-12:
            if not lo[k] <= origin[k] <= hi[k]:
                return False
            continue
        a, b = (lo[k] - origin[k]) / direction[k], (hi[k] - origin[k]) / direction[k]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    return t0 <= t1


def _against_wall(obj, house) -> bool:
    room = house.room(obj.room) if obj.room else house.room_at(obj.world_bbox.center[:2])
    if room is None:
        return False
    back = obj.transform.apply_vector(np.array([[0.0, 1.0, 0.0]]))[0, :2]
    verts = _vertices(obj, house.root)[:, :2]
    c = obj.world_bbox.center[:2]
    for i in range(len(room.floor_polygon)):
        a, b, inward = room.wall(i)
        outward = -inward
        if np.dot(back, outward) < math.cos(math.radians(30)):
            continue
        along = np.dot(c - a, (b - a) / np.linalg.norm(b - a))
        if not 0 <= along <= np.linalg.norm(b - a):
            continue
        gap = float(np.dot(a, outward)) - float((verts @ outward).max())
        if -SUPPORT_TOL <= gap <= AGAINST_WALL_GAP:
            return True
    return False


def relation_holds(rel: dict, house) -> bool:
    """Directional relations are read in the reference object's own frame:
    its front is local -y and its left is local +x (its right hand when facing front)."""
    kind = rel.get("type")
    if kind not in RELATION_TYPES:
        raise UnknownRelationType(f"unknown relation type {kind!r}")
    subj = house.get(rel["subject"])
    if kind == "against_wall":
        return _against_wall(subj, house)
    if kind == "in_middle_of_room":
        name = rel.get("reference") or subj.room
        room = house.room(name) if name and name != "room" else house.room_at(subj.world_bbox.center[:2])
        if room is None:
            return False
        pts = np.array(room.floor_polygon)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        q = (hi - lo) / 4.0
        c = subj.world_bbox.center[:2]
        return bool(np.all((c >= lo + q) & (c <= hi - q)))
    ref = house.get(rel["reference"])
    sb, rb = subj.world_bbox, ref.world_bbox
    if kind in ("in_front_of", "behind", "left_of", "right_of"):
        p = _local_center(subj, ref)
        lo, hi = ref.local_bbox.min, ref.local_bbox.max
        return bool(
            {"in_front_of": p[1] < lo[1], "behind": p[1] > hi[1], "left_of": p[0] > hi[0], "right_of": p[0] < lo[0]}[kind]
        )
    if kind == "next_to":
        d = rb.center[:2] - sb.center[:2]
        dist = float(np.linalg.norm(d))
        if dist < 1e-12:
            return True
        u = d / dist
        return dist <= NEXT_TO_GAP + _reach(sb, u) + _reach(rb, u)
    overlap_xy = bool(np.all(np.minimum(sb.max[:2], rb.max[:2]) > np.maximum(sb.min[:2], rb.min[:2])))
    if kind == "above":
        return overlap_xy and sb.min[2] >= rb.max[2] - SUPPORT_TOL
    if kind == "on_top_of":
        if subj.support.kind is not SupportKind.OBJECT or subj.support.parent_id != ref.id:
            return False
        gap = support_gap(subj, house)
        return gap is not None and abs(gap) <= SUPPORT_TOL
    front = subj.transform.apply_vector(np.array([[0.0, -1.0, 0.0]]))[0, :2]
    return _ray_hits_box_2d(sb.center[:2], front, rb.min[:2], rb.max[:2])


def relation_check(house, relations: list[dict]) -> list[dict]:
    out = []
    for rel in relations:
        if rel.get("type") not in RELATION_TYPES:
            raise UnknownRelationType(f"unknown relation type {rel.get('type')!r}")
        ok = relation_holds(rel, house)
        out.append({"relation": rel["type"], "subject": rel["subject"], "reference": rel.get("reference"), "satisfied": bool(ok)})
    return out
