"""Object-level mesh and material metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from scenec.kernel.mesh import PBR_CHANNELS, TriMesh, nonmanifold_edge_count
from scenec.errors import LoadError
from scenec.kernel.objio import load_obj
from scenec.sdf import MTL_NAME

UV_TOL = 1e-6


@dataclass(frozen=True)
class AssetReport:
    mat: int
    pbr: float
    nme: int
    fac: int
    vtx: int
    uvi: int

    def to_dict(self) -> dict:
        return asdict(self)


def _uv_edge_pairs(mesh: TriMesh) -> np.ndarray:
    """Face pairs joined by a shared edge whose UVs agree on both sides."""
    t = mesh.triangles
    f = np.repeat(np.arange(len(t)), 3)
    k = np.tile(np.arange(3), len(t))
    a = t[f, k]
    b = t[f, (k + 1) % 3]
    uv = mesh.uv.reshape(-1, 3, 2)
    uv_a = uv[f, k]
    uv_b = uv[f, (k + 1) % 3]
    # Orient each half-edge from its smaller vertex so both sides compare like with like.
    swap = a > b
    lo = np.where(swap, b, a)
    hi = np.where(swap, a, b)
    uv_lo = np.where(swap[:, None], uv_b, uv_a)
    uv_hi = np.where(swap[:, None], uv_a, uv_b)
    order = np.lexsort((hi, lo))
    lo, hi, f, uv_lo, uv_hi = lo[order], hi[order], f[order], uv_lo[order], uv_hi[order]
    same_edge = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
    pairs = []
    starts = np.flatnonzero(np.r_[True, ~same_edge])
    ends = np.r_[starts[1:], len(lo)]
    for s, e in zip(starts, ends):
        for i in range(s, e):
            for j in range(i + 1, e):
                if np.abs(uv_lo[i] - uv_lo[j]).max() <= UV_TOL and np.abs(uv_hi[i] - uv_hi[j]).max() <= UV_TOL:
                    pairs.append((f[i], f[j]))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def uv_islands(mesh: TriMesh) -> int:
    """Connected components of the face graph where faces connect across
    edges whose UV coordinates match on both sides. Meshes without UVs have none."""
    n = len(mesh.triangles)
    if mesh.uv is None or n == 0:
        return 0
    pairs = _uv_edge_pairs(mesh)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def object_metrics(meshes: list[TriMesh]) -> AssetReport:
    mat = 0
    materials = {}
    for m in meshes:
        used = set(np.unique(m.face_material).tolist()) if len(m.triangles) else set()
        for i, slot in enumerate(m.material_slots):
            if i in used:
                mat += 1
                materials.setdefault(slot.name, slot)
    pbr = float(np.mean([len(s.present_channels()) / len(PBR_CHANNELS) for s in materials.values()])) if materials else 0.0
    return AssetReport(
        mat=mat,
        pbr=pbr,
        nme=sum(nonmanifold_edge_count(m) for m in meshes),
        fac=sum(len(m.triangles) for m in meshes),
        vtx=sum(len(m.vertices) for m in meshes),
        uvi=sum(uv_islands(m) for m in meshes),
    )


def asset_dir_metrics(path: str | Path) -> AssetReport:
    """Metrics over every mesh file of an exported asset directory."""
    path = Path(path)
    files = sorted((path / "meshes").glob("*.obj"))
    if not files:
        raise LoadError(f"{path}: no mesh files under meshes/")
    meshes = []
    for obj in files:
        meshes.extend(load_obj(obj, path / MTL_NAME))
    return object_metrics(meshes)
