"""Vectorized ray/triangle intersection."""

from __future__ import annotations

import numpy as np

from scenec.kernel.mesh import TriMesh, face_normals


def ray_hits(origin, direction, vertices: np.ndarray, triangles: np.ndarray, eps: float = 1e-12):
    """Distances along the ray to every triangle it crosses, plus the hit face indices.

    Moller-Trumbore; hits behind the origin are dropped, edge hits count.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - a
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    tol = 1e-12
    hit = ok & (u >= -tol) & (v >= -tol) & (u + v <= 1 + tol) & (t >= 0)
    idx = np.nonzero(hit)[0]
    return t[idx], idx


def first_hit(origin, direction, meshes: list[TriMesh], max_dist: float, facing: str | None = None) -> float | None:
    """Nearest hit distance within ``max_dist``. ``facing='against'`` keeps only
    faces whose normal opposes the ray (surfaces seen from outside)."""
    best = None
    d = np.asarray(direction, dtype=float)
    for mesh in meshes:
        if len(mesh.triangles) == 0:
            continue
        t, idx = ray_hits(origin, d, mesh.vertices, mesh.triangles)
        if facing == "against" and len(idx):
            keep = face_normals(mesh.vertices, mesh.triangles[idx]) @ d < 0
            t = t[keep]
        t = t[t <= max_dist]
        if len(t) and (best is None or t.min() < best):
            best = float(t.min())
    return best
