"""Primitive mesh construction with canonical topology and UVs.

Every primitive is centered so that its AABB is symmetric about the origin,
except the open shells, whose rim sits on the top of the AABB. Curved kinds
use +z as their axis.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from scenec.errors import DegenerateParams
from scenec.kernel import uv as uvlib
from scenec.kernel.mesh import TriMesh, triangle_areas

DEFAULT_SEGMENTS = {"cyl": 32, "sph": (32, 16), "torus": (24, 12), "curve": 12, "open_cyl": 32, "hemishell": (32, 8)}


class PrimitiveKind(str, Enum):
    BOX = "box"
    CYL = "cyl"
    SPH = "sph"
    TORUS = "torus"
    CURVE = "curve"
    # Open shells used as Solidify inputs.
    OPEN_BOX = "open_box"
    OPEN_CYL = "open_cyl"
    HEMISHELL = "hemishell"
    QUAD = "quad"
    # Box whose front face carries the whole image (wall art).
    CANVAS = "canvas"


def _pos(value, name):
    v = float(value)
    if not math.isfinite(v) or v <= 0:
        raise DegenerateParams(f"{name} must be positive, got {value}")
    return v


def _vec_pos(values, n, name):
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise DegenerateParams(f"{name} must have {n} components")
    for i, v in enumerate(arr):
        _pos(v, f"{name}[{i}]")
    return arr


def _segments(kind: str, segments, pair: bool):
    if segments is None:
        segments = DEFAULT_SEGMENTS[kind]
    if pair:
        if isinstance(segments, (int, np.integer)):
            segments = (int(segments), max(int(segments) // 2, 3))
        a, b = (int(s) for s in segments)
        if a < 3 or b < (2 if kind == "hemishell" else 3):
            raise DegenerateParams(f"{kind} needs at least 3 segments per direction, got {segments}")
        return a, b
    if isinstance(segments, (tuple, list)):
        segments = segments[0]
    n = int(segments)
    if n < 3:
        raise DegenerateParams(f"{kind} needs at least 3 segments, got {segments}")
    return n


def _finish(name, kind, params, segments, vertices, triangles, uv) -> TriMesh:
    mesh = TriMesh(
        part_name=name,
        vertices=vertices,
        triangles=triangles,
        uv=uv,
        source={"kind": kind, "params": params, "segments": segments, "modifiers": [], "flipped": False},
    )
    if np.any(triangle_areas(mesh.vertices, mesh.triangles) <= 1e-12):
        raise DegenerateParams(f"{kind} produced a degenerate triangle; parameters too small")
    return mesh


# -- box family ----------------------------------------------------------------


def _box_faces(size, skip_top=False):
    half = np.asarray(size, dtype=float) / 2
    verts = np.array([[sx * half[0], sy * half[1], sz * half[2]] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)])

    def idx(sx, sy, sz):
        return (sx > 0) + 2 * (sy > 0) + 4 * (sz > 0)

    tris, uvs = [], []
    for axis, sign in uvlib.BOX_FACES:
        if skip_top and (axis, sign) == (2, 1):
            continue
        others = [a for a in range(3) if a != axis]
        corners = []
        for s0, s1 in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            s = [0, 0, 0]
            s[axis] = sign
            s[others[0]] = s0
            s[others[1]] = s1
            corners.append(idx(*s))
        a, b, c, d = corners
        normal = np.cross(verts[b] - verts[a], verts[c] - verts[a])
        if normal[axis] * sign < 0:
            a, b, c, d = a, d, c, b
        for tri in ((a, b, c), (a, c, d)):
            tris.append(tri)
            uvs.append((axis, sign))
    return verts, np.array(tris), uvs, half


def make_box(size, name="box", uv_mode="cross") -> TriMesh:
    size = _vec_pos(size, 3, "size")
    verts, tris, faces, half = _box_faces(size)
    uv = box_uv(verts, tris, faces, half, uv_mode)
    kind = "canvas" if uv_mode == "canvas" else "box"
    return _finish(name, kind, {"size": size.tolist()}, None, verts, tris, uv)


def box_uv(verts, tris, faces, half, uv_mode="cross"):
    fn = uvlib.canvas_uv if uv_mode == "canvas" else uvlib.box_cross_uv
    out = np.zeros((len(tris), 3, 2))
    for i, (tri, face) in enumerate(zip(tris, faces)):
        out[i] = fn(verts[list(tri)], half, face)
    return out.reshape(-1, 2)


def make_open_box(size, name="open_box") -> TriMesh:
    size = _vec_pos(size, 3, "size")
    verts, tris, faces, half = _box_faces(size, skip_top=True)
    uv = box_uv(verts, tris, faces, half)
    return _finish(name, "open_box", {"size": size.tolist()}, None, verts, tris, uv)


def make_quad(size, name="quad") -> TriMesh:
    sx, sy = _vec_pos(size, 2, "size")
    verts = np.array([[-sx / 2, -sy / 2, 0.0], [sx / 2, -sy / 2, 0.0], [sx / 2, sy / 2, 0.0], [-sx / 2, sy / 2, 0.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 0], [1, 1], [0, 1]], dtype=float)
    return _finish(name, "quad", {"size": [sx, sy]}, None, verts, tris, uv)


# -- rotational family -------------------------------------------------------


def make_cylinder(radius, height, segments=None, name="cyl", radius_y=None, open_top=False) -> TriMesh:
    kind = "open_cyl" if open_top else "cyl"
    rx = _pos(radius, "radius")
    ry = _pos(radius_y if radius_y is not None else radius, "radius_y")
    h = _pos(height, "height")
    n = _segments(kind, segments, pair=False)
    # Circumscribed polygon, rotated half a step: edges touch the true circle
    # on the axes, so the AABB stays exact and the mass properties err far
    # less than with vertices on the circle.
    ang = 2 * math.pi * (np.arange(n) + 0.5) / n
    grow = 1.0 / math.cos(math.pi / n)
    ring = np.stack([rx * grow * np.cos(ang), ry * grow * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(n, -h / 2)])
    top = np.column_stack([ring, np.full(n, h / 2)])
    verts = [bottom, top, [[0.0, 0.0, -h / 2]]]
    bc = 2 * n
    tc = 2 * n + 1
    if not open_top:
        verts.append([[0.0, 0.0, h / 2]])
    verts = np.concatenate(verts)

    tris, uv = [], []
    for k in range(n):
        k1 = (k + 1) % n
        u0, u1 = k / n, (k + 1) / n
        # Side strip occupies the lower half of the atlas.
        tris.append((k, k1, n + k1))
        uv.append([(u0, 0.0), (u1, 0.0), (u1, 0.5)])
        tris.append((k, n + k1, n + k))
        uv.append([(u0, 0.0), (u1, 0.5), (u0, 0.5)])
    cells = {"bottom": (0.0, 0.5, 0.5), "top": (0.5, 0.5, 0.5)}
    for k in range(n):
        k1 = (k + 1) % n
        tri = (bc, k1, k)
        tris.append(tri)
        uv.append(uvlib.disc_uv(verts[list(tri), :2], (rx * grow, ry * grow), cells["bottom"]))
    if not open_top:
        for k in range(n):
            k1 = (k + 1) % n
            tri = (tc, n + k, n + k1)
            tris.append(tri)
            uv.append(uvlib.disc_uv(verts[list(tri), :2], (rx * grow, ry * grow), cells["top"]))
    params = {"radius": rx, "radius_y": ry, "height": h}
    return _finish(name, kind, params, n, verts, np.array(tris), np.asarray(uv, dtype=float).reshape(-1, 2))


def make_sphere(radii, segments=None, name="sph") -> TriMesh:
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if radii.size == 1:
        radii = np.repeat(radii, 3)
    rx, ry, rz = _vec_pos(radii, 3, "radii")
    n_lon, n_lat = _segments("sph", segments, pair=True)
    verts = [[0.0, 0.0, -rz]]
    for i in range(1, n_lat):
        theta = -math.pi / 2 + math.pi * i / n_lat
        ang = 2 * math.pi * np.arange(n_lon) / n_lon
        verts.extend(np.column_stack([rx * math.cos(theta) * np.cos(ang), ry * math.cos(theta) * np.sin(ang), np.full(n_lon, rz * math.sin(theta))]))
    verts.append([0.0, 0.0, rz])
    verts = np.asarray(verts)
    south, north = 0, len(verts) - 1

    def ring(i, k):
        return 1 + (i - 1) * n_lon + (k % n_lon)

    tris, uv = [], []
    for k in range(n_lon):
        u0, u1, um = k / n_lon, (k + 1) / n_lon, (k + 0.5) / n_lon
        tris.append((south, ring(1, k + 1), ring(1, k)))
        uv.append([(um, 0.0), (u1, 1 / n_lat), (u0, 1 / n_lat)])
        for i in range(1, n_lat - 1):
            v0, v1 = i / n_lat, (i + 1) / n_lat
            a, b, c, d = ring(i, k), ring(i, k + 1), ring(i + 1, k + 1), ring(i + 1, k)
            tris.append((a, b, c))
            uv.append([(u0, v0), (u1, v0), (u1, v1)])
            tris.append((a, c, d))
            uv.append([(u0, v0), (u1, v1), (u0, v1)])
        top = n_lat - 1
        tris.append((north, ring(top, k), ring(top, k + 1)))
        uv.append([(um, 1.0), (u0, top / n_lat), (u1, top / n_lat)])
    params = {"radii": [rx, ry, rz]}
    return _finish(name, "sph", params, [n_lon, n_lat], verts, np.array(tris), np.asarray(uv, dtype=float).reshape(-1, 2))


def make_hemishell(radii, segments=None, name="hemishell") -> TriMesh:
    """Open lower half of an ellipsoid; rim at the top of its AABB."""
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if radii.size == 1:
        radii = np.repeat(radii, 3)
    rx, ry, rz = _vec_pos(radii, 3, "radii")
    n_lon, n_lat = _segments("hemishell", segments, pair=True)
    # Ring i = 0 is the rim (equator), ring n_lat is the pole.
    verts = []
    for i in range(n_lat):
        theta = -math.pi / 2 * i / n_lat
        ang = 2 * math.pi * np.arange(n_lon) / n_lon
        verts.extend(np.column_stack([rx * math.cos(theta) * np.cos(ang), ry * math.cos(theta) * np.sin(ang), np.full(n_lon, rz * math.sin(theta))]))
    verts.append([0.0, 0.0, -rz])
    verts = np.asarray(verts)
    verts[:, 2] += rz / 2
    pole = len(verts) - 1

    def ring(i, k):
        return i * n_lon + (k % n_lon)

    tris, uv = [], []
    for k in range(n_lon):
        u0, u1, um = k / n_lon, (k + 1) / n_lon, (k + 0.5) / n_lon
        for i in range(n_lat - 1):
            v0, v1 = 1 - i / n_lat, 1 - (i + 1) / n_lat
            a, b, c, d = ring(i, k), ring(i + 1, k), ring(i + 1, k + 1), ring(i, k + 1)
            tris.append((a, b, c))
            uv.append([(u0, v0), (u0, v1), (u1, v1)])
            tris.append((a, c, d))
            uv.append([(u0, v0), (u1, v1), (u1, v0)])
        last = n_lat - 1
        tris.append((ring(last, k), pole, ring(last, k + 1)))
        uv.append([(u0, 1 - last / n_lat), (um, 0.0), (u1, 1 - last / n_lat)])
    params = {"radii": [rx, ry, rz]}
    return _finish(name, "hemishell", params, [n_lon, n_lat], verts, np.array(tris), np.asarray(uv, dtype=float).reshape(-1, 2))


def make_torus(major, minor, segments=None, name="torus") -> TriMesh:
    R = _pos(major, "major")
    r = _pos(minor, "minor")
    if r >= R:
        raise DegenerateParams(f"torus minor radius {r} must be below major radius {R}")
    n_major, n_minor = _segments("torus", segments, pair=True)
    phi = 2 * math.pi * np.arange(n_major) / n_major
    theta = 2 * math.pi * np.arange(n_minor) / n_minor
    P, T = np.meshgrid(phi, theta, indexing="ij")
    verts = np.stack([(R + r * np.cos(T)) * np.cos(P), (R + r * np.cos(T)) * np.sin(P), r * np.sin(T)], axis=-1).reshape(-1, 3)

    def idx(i, j):
        return (i % n_major) * n_minor + (j % n_minor)

    tris, uv = [], []
    for i in range(n_major):
        for j in range(n_minor):
            u0, u1 = i / n_major, (i + 1) / n_major
            v0, v1 = j / n_minor, (j + 1) / n_minor
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            uv.append([(u0, v0), (u1, v0), (u1, v1)])
            tris.append((a, c, d))
            uv.append([(u0, v0), (u1, v1), (u0, v1)])
    params = {"major": R, "minor": r}
    return _finish(name, "torus", params, [n_major, n_minor], verts, np.array(tris), np.asarray(uv, dtype=float).reshape(-1, 2))


# -- swept polyline ---------------------------------------------------------------


def _segment_distance(p0, p1, q0, q1) -> float:
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c = d1 @ r
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-15 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm((p0 + d1 * s) - (q0 + d2 * t)))


def _check_polyline(points: np.ndarray, radius: float, closed: bool) -> None:
    n = len(points)
    if n < (3 if closed else 2):
        raise DegenerateParams("curve needs at least 2 points (3 when closed)")
    seg = np.roll(points, -1, axis=0) - points if closed else np.diff(points, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    if np.any(lengths <= 1e-9):
        raise DegenerateParams("curve has repeated consecutive points")
    m = len(seg)
    ends = [(points[i], points[(i + 1) % n]) for i in range(m)]
    for i in range(m):
        for j in range(i + 2, m):
            if closed and i == 0 and j == m - 1:
                continue
            if _segment_distance(*ends[i], *ends[j]) < 2 * radius:
                raise DegenerateParams(f"curve polyline self-intersects (segments {i} and {j})")
    # Sharp turns fold the swept tube onto itself.
    corners = range(m) if closed else range(1, m)
    for i in corners:
        t0 = seg[i - 1] / lengths[i - 1]
        t1 = seg[i % m] / lengths[i % m]
        turn = math.acos(float(np.clip(t0 @ t1, -1.0, 1.0)))
        if turn > math.radians(150) or radius * math.tan(turn / 2) >= 0.5 * min(lengths[i - 1], lengths[i % m]):
            raise DegenerateParams(f"curve turns too sharply at point {i} for radius {radius}")


def _transport_frames(points, closed):
    n = len(points)
    if closed:
        tang = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    else:
        tang = np.empty_like(points)
        tang[0] = points[1] - points[0]
        tang[-1] = points[-1] - points[-2]
        d = np.diff(points, axis=0)
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        tang[1:-1] = d[:-1] + d[1:]
    tang = tang / np.linalg.norm(tang, axis=1, keepdims=True)
    helper = np.eye(3)[np.argmin(np.abs(tang[0]))]
    normal = np.cross(tang[0], helper)
    normal /= np.linalg.norm(normal)
    normals = [normal]
    for i in range(1, n):
        nrm = normals[-1] - (normals[-1] @ tang[i]) * tang[i]
        normals.append(nrm / np.linalg.norm(nrm))
    normals = np.array(normals)
    if closed:
        # Spread the holonomy twist evenly so the last ring lines up with the first.
        end = normals[-1] - (normals[-1] @ tang[0]) * tang[0]
        end /= np.linalg.norm(end)
        twist = math.atan2(np.cross(end, normals[0]) @ tang[0], end @ normals[0])
        for i in range(n):
            a = twist * i / n
            t = tang[i]
            nm = normals[i]
            normals[i] = nm * math.cos(a) + np.cross(t, nm) * math.sin(a)
    binormals = np.cross(tang, normals)
    return tang, normals, binormals


def make_curve(points, radius, closed=False, segments=None, name="curve") -> TriMesh:
    """Sweep a circular profile along a sampled polyline."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise DegenerateParams("curve points must be finite")
    r = _pos(radius, "radius")
    m = _segments("curve", segments, pair=False)
    _check_polyline(pts, r, closed)
    n = len(pts)
    _, normals, binormals = _transport_frames(pts, closed)
    ang = 2 * math.pi * np.arange(m) / m
    rings = pts[:, None, :] + r * (np.cos(ang)[None, :, None] * normals[:, None, :] + np.sin(ang)[None, :, None] * binormals[:, None, :])
    verts = rings.reshape(-1, 3)
    seg_len = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]) if closed else pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    arc = arc / arc[-1]

    tris, uv = [], []
    n_rings = n if closed else n - 1
    for i in range(n_rings):
        i1 = (i + 1) % n
        s0, s1 = arc[i], arc[i + 1]
        for j in range(m):
            j1 = (j + 1) % m
            v0, v1 = 0.5 * j / m, 0.5 * (j + 1) / m
            a, b, c, d = i * m + j, i1 * m + j, i1 * m + j1, i * m + j1
            tris.append((a, b, c))
            uv.append([(s0, v0), (s1, v0), (s1, v1)])
            tris.append((a, c, d))
            uv.append([(s0, v0), (s1, v1), (s0, v1)])
    if not closed:
        verts = np.vstack([verts, pts[0], pts[-1]])
        c0, c1 = len(verts) - 2, len(verts) - 1
        for j in range(m):
            j1 = (j + 1) % m
            tris.append((c0, j1, j))
            uv.append([(0.25, 0.75), (0.25 + 0.25 * math.cos(ang[j1 % m]), 0.75 + 0.25 * math.sin(ang[j1 % m])), (0.25 + 0.25 * math.cos(ang[j]), 0.75 + 0.25 * math.sin(ang[j]))])
            base = (n - 1) * m
            tris.append((c1, base + j, base + j1))
            uv.append([(0.75, 0.75), (0.75 + 0.25 * math.cos(ang[j]), 0.75 + 0.25 * math.sin(ang[j])), (0.75 + 0.25 * math.cos(ang[j1 % m]), 0.75 + 0.25 * math.sin(ang[j1 % m]))])
    tris = np.array(tris)
    # The sweep direction decides winding; make normals point outward.
    mesh_v = verts
    a, b, c = mesh_v[tris[:, 0]], mesh_v[tris[:, 1]], mesh_v[tris[:, 2]]
    vol = np.einsum("ij,ij->i", a - pts.mean(axis=0), np.cross(b - pts.mean(axis=0), c - pts.mean(axis=0))).sum()
    uv = np.asarray(uv, dtype=float).reshape(len(tris), 3, 2)
    if not closed and vol < 0:
        tris = tris[:, [0, 2, 1]]
        uv = uv[:, [0, 2, 1]]
    elif closed:
        # For closed loops the sign test is unreliable; use the first side face.
        centre = pts[0]
        tri = tris[0]
        nrm = np.cross(verts[tri[1]] - verts[tri[0]], verts[tri[2]] - verts[tri[0]])
        if nrm @ (verts[tri[0]] - centre) < 0:
            tris = tris[:, [0, 2, 1]]
            uv = uv[:, [0, 2, 1]]
    params = {"points": pts.tolist(), "radius": r, "closed": bool(closed)}
    return _finish(name, "curve", params, m, verts, tris, uv.reshape(-1, 2))


# -- dispatch ------------------------------------------------------------------


def make_primitive(kind, params: dict, segments=None, name: str | None = None) -> TriMesh:
    """Build a primitive from a parameter dict.

    Parameters per kind: box/open_box ``size`` (3); quad ``size`` (2);
    cyl/open_cyl ``radius``, ``height`` and optional ``radius_y``;
    sph/hemishell ``radii`` (1 or 3); torus ``major``, ``minor``;
    curve ``points``, ``radius``, ``closed``.
    """
    kind = PrimitiveKind(kind)
    name = name or kind.value
    p = dict(params)
    try:
        if kind in (PrimitiveKind.BOX, PrimitiveKind.CANVAS):
            return make_box(p["size"], name, "canvas" if kind is PrimitiveKind.CANVAS else "cross")
        if kind is PrimitiveKind.OPEN_BOX:
            return make_open_box(p["size"], name)
        if kind is PrimitiveKind.QUAD:
            return make_quad(p["size"], name)
        if kind in (PrimitiveKind.CYL, PrimitiveKind.OPEN_CYL):
            return make_cylinder(p["radius"], p["height"], segments, name, p.get("radius_y"), open_top=kind is PrimitiveKind.OPEN_CYL)
        if kind is PrimitiveKind.SPH:
            return make_sphere(p["radii"] if "radii" in p else p["radius"], segments, name)
        if kind is PrimitiveKind.HEMISHELL:
            return make_hemishell(p["radii"] if "radii" in p else p["radius"], segments, name)
        if kind is PrimitiveKind.TORUS:
            return make_torus(p["major"], p["minor"], segments, name)
        return make_curve(p["points"], p["radius"], bool(p.get("closed", False)), segments, name)
    except KeyError as exc:
        raise DegenerateParams(f"{kind.value} is missing parameter {exc}") from None
