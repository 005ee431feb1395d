"""Canonical UV layouts for kernel primitives.

Layouts are computed per triangle corner from the canonical topology, so
seams are explicit: a corner on a seam simply receives the coordinate that
belongs to its triangle's side of the seam.
"""

from __future__ import annotations

import numpy as np

# Cross-net cell size for boxes; the net is 4 cells wide and 3 tall.
_CELL = 0.25

# Box faces in construction order: (axis, sign). Two triangles per face.
BOX_FACES = ((1, -1), (0, 1), (1, 1), (0, -1), (2, 1), (2, -1))


def box_cross_uv(points: np.ndarray, half: np.ndarray, face: tuple[int, int]) -> np.ndarray:
    """UV for points on one face of a box centered at the origin.

    The net is a strip front(-y), right(+x), back(+y), left(-x) in the middle
    row, with top above and bottom below the front cell. Every fold of the net
    is a shared edge with identical UVs on both sides, so the layout is a
    single island.
    """
    a, b, c = half
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    fx = (x + a) / (2 * a)
    fy = (y + b) / (2 * b)
    fz = (z + c) / (2 * c)
    axis, sign = face
    if axis == 2:
        u = fx * _CELL
        v = 0.5 + fy * _CELL if sign > 0 else 0.25 - fy * _CELL
    else:
        col, t = {
            (1, -1): (0, fx),
            (0, 1): (1, fy),
            (1, 1): (2, 1.0 - fx),
            (0, -1): (3, 1.0 - fy),
        }[(axis, sign)]
        u = (col + t) * _CELL
        v = _CELL + fz * _CELL
    return np.stack([u, v], axis=1)


def canvas_uv(points: np.ndarray, half: np.ndarray, face: tuple[int, int]) -> np.ndarray:
    """The -y face covers the whole unit square; other faces keep the cross net."""
    if face == (1, -1):
        a, _, c = half
        return np.stack([(points[:, 0] + a) / (2 * a), (points[:, 2] + c) / (2 * c)], axis=1)
    return box_cross_uv(points, half, face)


def disc_uv(points_xy: np.ndarray, radii: tuple[float, float], cell: tuple[float, float, float]) -> np.ndarray:
    """Planar projection of a cap disc into a square cell (u0, v0, size)."""
    u0, v0, size = cell
    u = u0 + (points_xy[:, 0] / radii[0] * 0.5 + 0.5) * size
    v = v0 + (points_xy[:, 1] / radii[1] * 0.5 + 0.5) * size
    return np.stack([u, v], axis=1)


def projection_uv(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Fallback unwrap for modified kernel meshes.

    Each triangle is projected along its dominant normal axis into one of six
    cells of a 3x2 atlas. Deterministic, always inside [0, 1].
    """
    v = vertices
    t = triangles
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    axis = np.argmax(np.abs(n), axis=1)
    sign = np.where(n[np.arange(len(t)), axis] >= 0, 1, 0)
    lo = v.min(axis=0)
    ext = np.maximum(v.max(axis=0) - lo, 1e-12)
    norm = (v - lo) / ext
    uv = np.zeros((len(t), 3, 2))
    other = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
    for ax in range(3):
        for sg in (0, 1):
            sel = (axis == ax) & (sign == sg)
            if not np.any(sel):
                continue
            i, j = other[ax]
            cell = ax * 2 + sg
            cu, cv = (cell % 3) / 3.0, (cell // 3) / 2.0
            corners = norm[t[sel]]
            uv[sel, :, 0] = cu + corners[:, :, i] / 3.0
            uv[sel, :, 1] = cv + corners[:, :, j] / 2.0
    return uv.reshape(-1, 2)
