"""Mesh modifiers: mirror, radial array, solidify, bevel, duplicate and UV regeneration."""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree
from scipy.spatial.transform import Rotation

from scenec.core import RigidTransform
from scenec.errors import DegenerateParams, SelfIntersection, UnsupportedTopology, WidthTooLarge
from scenec.kernel import uv as uvlib
from scenec.kernel.mesh import TriMesh, boundary_edges, face_normals, is_closed, triangle_areas, undirected_edges
from scenec.kernel.primitives import PrimitiveKind, make_primitive

# Modifiers that change topology; canonical UVs no longer apply after them.
TOPOLOGICAL_MODIFIERS = frozenset({"solidify", "bevel"})


def _record(mesh: TriMesh, entry: dict) -> None:
    if mesh.source is not None:
        mesh.source.setdefault("modifiers", []).append(entry)


def _unit(v, name="normal") -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n < 1e-12:
        raise DegenerateParams(f"{name} must be a non-zero vector")
    return v / n


def reflection_matrix(normal) -> np.ndarray:
    n = _unit(normal)
    return np.eye(3) - 2.0 * np.outer(n, n)


def mirror_about(mesh: TriMesh, plane_point, plane_normal, name: str | None = None) -> TriMesh:
    """Reflect across the plane through ``plane_point`` with normal ``plane_normal``.

    Winding is reversed so normals stay outward. The pose stays a proper
    rotation by absorbing the reflection into a local x flip.
    """
    p = np.asarray(plane_point, dtype=float).reshape(3)
    n = _unit(plane_normal)
    d = (mesh.vertices - p) @ n
    verts = mesh.vertices - 2.0 * d[:, None] * n[None, :]
    tris = mesh.triangles[:, [0, 2, 1]]
    uv = None
    if mesh.uv is not None:
        uv = mesh.uv.reshape(-1, 3, 2)[:, [0, 2, 1]].reshape(-1, 2)
    refl = reflection_matrix(n)
    rot = refl @ mesh.pose.rotation @ np.diag([-1.0, 1.0, 1.0])
    trans = mesh.pose.translation - 2.0 * ((mesh.pose.translation - p) @ n) * n
    out = mesh.with_(vertices=verts, triangles=tris, uv=uv, pose=RigidTransform(rot, trans))
    if name is not None:
        out.part_name = name
    if out.source is not None:
        out.source["flipped"] = not out.source.get("flipped", False)
    _record(out, {"op": "mirror", "point": p.tolist(), "normal": n.tolist()})
    return out


def radial_array(mesh: TriMesh, pivot, axis, count: int) -> list[TriMesh]:
    """``count`` copies rotated by 2*pi*k/count about the axis through ``pivot``.

    Copy k is computed from the original, so there is no accumulated drift.
    Copy 0 keeps the original name; the others get ``name_k``.
    """
    if int(count) != count or count < 2:
        raise DegenerateParams(f"radial_array needs count >= 2, got {count}")
    count = int(count)
    pivot = np.asarray(pivot, dtype=float).reshape(3)
    a = _unit(axis, "axis")
    out = []
    for k in range(count):
        rot = Rotation.from_rotvec(a * (2.0 * math.pi * k / count)).as_matrix()
        tf = RigidTransform(rot, pivot - rot @ pivot)
        copy = mesh.transformed(tf)
        if k:
            copy.part_name = f"{mesh.part_name}_{k}"
        _record(copy, {"op": "radial", "index": k, "count": count})
        out.append(copy)
    return out


def duplicate_part(mesh: TriMesh, new_name: str, offset: RigidTransform | None = None) -> TriMesh:
    out = mesh.copy() if offset is None else mesh.transformed(offset)
    out.part_name = new_name
    return out


# -- solidify ------------------------------------------------------------------


def _angle_weighted_normals(vertices, triangles, fnormals) -> np.ndarray:
    v = vertices
    t = triangles
    normals = np.zeros_like(v)
    for corner in range(3):
        i = t[:, corner]
        e1 = v[t[:, (corner + 1) % 3]] - v[i]
        e2 = v[t[:, (corner + 2) % 3]] - v[i]
        cosang = np.einsum("ij,ij->i", e1, e2) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(normals, i, fnormals * ang[:, None])
    norm = np.linalg.norm(normals, axis=1, keepdims=True)
    return normals / np.where(norm > 0, norm, 1.0)


def solidify(mesh: TriMesh, thickness: float) -> TriMesh:
    """Thicken an open oriented shell inward into a closed solid.

    Inner vertices move along angle-weighted vertex normals, scaled so that
    flat-sided corners keep an even wall thickness. Rim quads join each
    boundary edge to its inner copy.
    """
    t = float(thickness)
    if not math.isfinite(t) or t <= 0:
        raise DegenerateParams(f"solidify thickness must be positive, got {thickness}")
    _, counts = undirected_edges(mesh.triangles)
    if np.any(counts > 2):
        raise UnsupportedTopology("solidify needs a 2-manifold shell")
    v = mesh.vertices
    tri = mesh.triangles
    n = len(v)
    fn = face_normals(v, tri)
    vn = _angle_weighted_normals(v, tri, fn)
    dots = np.zeros(n)
    hits = np.zeros(n)
    for corner in range(3):
        np.add.at(dots, tri[:, corner], np.einsum("ij,ij->i", fn, vn[tri[:, corner]]))
        np.add.at(hits, tri[:, corner], 1.0)
    mean_dot = dots / np.maximum(hits, 1.0)
    scale = np.minimum(1.0 / np.maximum(mean_dot, 1e-6), 3.0)
    inner = v - t * scale[:, None] * vn

    inner_tris = tri[:, [0, 2, 1]] + n
    # An inverted or collapsed inner face means the offset passed a focal point.
    inner_fn = np.cross(inner[tri[:, 1]] - inner[tri[:, 0]], inner[tri[:, 2]] - inner[tri[:, 0]])
    outer_area2 = 2.0 * triangle_areas(v, tri)
    if np.any(np.einsum("ij,ij->i", inner_fn, fn) <= 1e-6 * outer_area2):
        raise SelfIntersection(f"solidify thickness {t} exceeds the local curvature radius")

    rim = []
    for a, b in boundary_edges(tri):
        rim.append((b, a, a + n))
        rim.append((b, a + n, b + n))
    all_tris = np.concatenate([tri, inner_tris, np.asarray(rim, dtype=np.int64).reshape(-1, 3)])
    all_v = np.concatenate([v, inner])
    slot = mesh.face_material
    fmat = np.concatenate([slot, slot, np.full(len(rim), slot[0] if len(slot) else 0, dtype=np.int64)])
    out = mesh.with_(vertices=all_v, triangles=all_tris, uv=None, face_material=fmat)
    if np.any(triangle_areas(all_v, all_tris) <= 1e-12):
        raise SelfIntersection("solidify produced a collapsed rim face")
    _record(out, {"op": "solidify", "thickness": t})
    return out


# -- bevel -------------------------------------------------------------------


def sphere_directions(frequency: int) -> np.ndarray:
    """Unit directions from an octahedron whose edges are split ``frequency`` times.

    Frequency 1 is the plain octahedron (the six axis directions), which
    gives a single 45-degree chamfer facet per edge.
    """
    f = int(frequency)
    dirs = set()
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                for i in range(f + 1):
                    for j in range(f + 1 - i):
                        k = f - i - j
                        dirs.add((sx * i, sy * j, sz * k))
    arr = np.array(sorted(dirs), dtype=float)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def _face_planes(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    fn = face_normals(mesh.vertices, mesh.triangles)
    offs = np.einsum("ij,ij->i", fn, mesh.vertices[mesh.triangles[:, 0]])
    planes = np.round(np.column_stack([fn, offs]), 9)
    planes = np.unique(planes, axis=0)
    return planes[:, :3], planes[:, 3]


def _is_convex(mesh: TriMesh, normals, offsets, tol=1e-9) -> bool:
    scale = max(float(np.abs(mesh.vertices).max()), 1.0)
    return bool(np.all(mesh.vertices @ normals.T - offsets[None, :] <= tol * scale))


def _polygon_faces(points: np.ndarray, tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Convex hull of ``points`` as fan-triangulated planar polygons.

    Hull facets are merged with coplanar neighbours, and each polygon is read
    off as the boundary loop of its facet group, so near-coplanar facets never
    get interleaved.
    """
    hull = ConvexHull(points)
    eqs = hull.equations
    scale = max(float(np.abs(points).max()), 1.0)
    n = len(hull.simplices)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in hull.neighbors[i]:
            if j > i and np.abs(eqs[i, :3] - eqs[j, :3]).max() <= tol and abs(eqs[i, 3] - eqs[j, 3]) <= tol * scale:
                parent[find(j)] = find(i)
    groups: dict[int, list[tuple[int, int, int]]] = {}
    for i, simplex in enumerate(hull.simplices):
        a, b, c = (int(v) for v in simplex)
        if np.dot(np.cross(points[b] - points[a], points[c] - points[a]), eqs[i, :3]) < 0:
            b, c = c, b
        groups.setdefault(find(i), []).append((a, b, c))
    polys = []
    for key in sorted(groups):
        directed = {(t[k], t[(k + 1) % 3]) for t in groups[key] for k in range(3)}
        nxt = {a: b for a, b in directed if (b, a) not in directed}
        first = min(nxt)
        loop = [first]
        while nxt[loop[-1]] != first:
            loop.append(nxt[loop[-1]])
            if len(loop) > len(nxt):
                raise UnsupportedTopology("bevel hull facet group is not a simple polygon")
        polys.append(loop)
    # Drop vertices that sit in the middle of a straight polygon side; they
    # must go everywhere at once or a T-junction appears.
    redundant = set()
    for poly in polys:
        m = len(poly)
        for i in range(m):
            a, b, c = points[poly[i - 1]], points[poly[i]], points[poly[(i + 1) % m]]
            if np.linalg.norm(np.cross(b - a, c - b)) <= 1e-12 * max(np.linalg.norm(c - a) ** 2, 1e-30):
                redundant.add(poly[i])
    used = sorted({i for poly in polys for i in poly} - redundant)
    remap = {old: new for new, old in enumerate(used)}
    verts = points[used]
    tris = []
    for poly in polys:
        poly = [remap[i] for i in poly if i not in redundant]
        tris.extend(_best_fan(verts, poly))
    return verts, np.asarray(tris, dtype=np.int64)


def _best_fan(verts: np.ndarray, poly: list[int]) -> list[tuple[int, int, int]]:
    """Fan-triangulate a convex polygon from the apex whose smallest triangle is largest."""
    m = len(poly)
    best, best_area = None, -1.0
    for s in range(m):
        rot = poly[s:] + poly[:s]
        fan = [(rot[0], rot[k], rot[k + 1]) for k in range(1, m - 1)]
        idx = np.asarray(fan)
        area = float(triangle_areas(verts, idx).min())
        if area > best_area:
            best, best_area = fan, area
    return best


# Inner-polytope vertices closer than this fraction of the bevel width are merged.
SNAP_FRACTION = 0.02


def _snap_clusters(points: np.ndarray, radius: float) -> np.ndarray:
    """Replace each cluster of points within ``radius`` of one another by its mean.

    Means are convex combinations, so a snapped point stays inside the hull.
    """
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return points
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    sums = np.zeros((labels.max() + 1, 3))
    np.add.at(sums, labels, points)
    return sums / np.bincount(labels)[:, None]


def bevel_edges(mesh: TriMesh, width: float, segments: int = 1) -> TriMesh:
    """Round every convex edge and corner of a convex closed mesh.

    The result is the Minkowski sum of the polytope shrunk by ``width`` with a
    polyhedral ball of radius ``width``, so it never leaves the original hull
    and its AABB does not grow along face-normal axes.
    """
    w = float(width)
    if not math.isfinite(w) or w < 0:
        raise DegenerateParams(f"bevel width must be non-negative, got {width}")
    if w == 0:
        return mesh.copy()
    if int(segments) < 1:
        raise DegenerateParams(f"bevel segments must be >= 1, got {segments}")
    edges, _ = undirected_edges(mesh.triangles)
    shortest = float(np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1).min())
    if w >= 0.5 * shortest:
        raise WidthTooLarge(f"bevel width {w} must be below {0.5 * shortest:.6g} (half the shortest edge)")
    if not is_closed(mesh):
        raise UnsupportedTopology("bevel needs a closed mesh")
    normals, offsets = _face_planes(mesh)
    if not _is_convex(mesh, normals, offsets):
        raise UnsupportedTopology("bevel supports convex meshes only")
    interior = mesh.vertices.mean(axis=0)
    halfspaces = np.column_stack([normals, -(offsets - w)])
    if np.any(halfspaces[:, :3] @ interior + halfspaces[:, 3] >= 0):
        raise WidthTooLarge(f"bevel width {w} consumes the whole solid")
    try:
        inner = HalfspaceIntersection(halfspaces, interior).intersections
    except QhullError as exc:
        raise WidthTooLarge(f"bevel width {w} collapses the solid") from exc
    inner = _snap_clusters(np.unique(np.round(inner, 12), axis=0), SNAP_FRACTION * w)
    pts = (inner[:, None, :] + w * sphere_directions(segments)[None, :, :]).reshape(-1, 3)
    pts = np.unique(np.round(pts, 12), axis=0)
    try:
        verts, tris = _polygon_faces(pts)
    except QhullError as exc:
        raise UnsupportedTopology(f"bevel hull failed: {exc}") from exc
    if np.any(triangle_areas(verts, tris) <= 1e-12):
        raise DegenerateParams(f"bevel width {w} leaves degenerate facets")
    slot = int(mesh.face_material[0]) if len(mesh.face_material) else 0
    out = mesh.with_(vertices=verts, triangles=tris, uv=None, face_material=np.full(len(tris), slot))
    _record(out, {"op": "bevel", "width": w, "segments": int(segments)})
    return out


def planar_face_count(mesh: TriMesh, decimals: int = 9) -> int:
    """Number of distinct face planes (polygons before triangulation)."""
    fn = face_normals(mesh.vertices, mesh.triangles)
    offs = np.einsum("ij,ij->i", fn, mesh.vertices[mesh.triangles[:, 0]])
    return len(np.unique(np.round(np.column_stack([fn, offs]), decimals), axis=0))


# -- UV regeneration ---------------------------------------------------------


def generate_uv(mesh: TriMesh, kind) -> TriMesh:
    """Assign the canonical unwrap for ``kind`` to a kernel mesh.

    Meshes whose topology was changed by solidify or bevel get a dominant-axis
    projection atlas instead. Meshes not produced by the kernel are rejected.
    """
    kind = PrimitiveKind(kind)
    src = mesh.source
    if not src or "kind" not in src:
        raise UnsupportedTopology(f"{mesh.part_name}: mesh was not produced by the kernel")
    if any(m.get("op") in TOPOLOGICAL_MODIFIERS for m in src.get("modifiers", [])):
        return mesh.with_(uv=uvlib.projection_uv(mesh.vertices, mesh.triangles))
    src_kind = PrimitiveKind(src["kind"])
    boxes = {PrimitiveKind.BOX, PrimitiveKind.CANVAS}
    if kind != src_kind and not (kind in boxes and src_kind in boxes):
        raise UnsupportedTopology(f"{mesh.part_name}: cannot unwrap a {src_kind.value} as {kind.value}")
    ref = make_primitive(kind, src["params"], src.get("segments"), mesh.part_name)
    if ref.triangles.shape != mesh.triangles.shape or len(ref.vertices) != len(mesh.vertices):
        raise UnsupportedTopology(f"{mesh.part_name}: topology does not match a canonical {kind.value}")
    uv = ref.uv.reshape(-1, 3, 2)
    if src.get("flipped"):
        uv = uv[:, [0, 2, 1]]
    out = mesh.with_(uv=uv.reshape(-1, 2))
    out.source["kind"] = kind.value
    return out
