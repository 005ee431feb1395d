"""Wavefront OBJ/MTL writing and reading with byte-stable number formatting."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from scenec.errors import LoadError
from scenec.kernel.mesh import MaterialSpec, TriMesh


def fmt(value: float) -> str:
    """Fixed 6-decimal formatting with negative zero folded to zero."""
    s = f"{float(value):.6f}"
    return "0.000000" if s == "-0.000000" else s


def _fmt_row(values) -> str:
    return " ".join(fmt(v) for v in values)


def obj_text(meshes: Sequence[TriMesh], mtl_name: str | None = None) -> str:
    """One ``o`` group per part; ``vt`` entries are shared across identical UVs."""
    lines = ["# scenec mesh"]
    if mtl_name:
        lines.append(f"mtllib {mtl_name}")
    v_base = 1
    vt_index: dict[str, int] = {}
    vt_lines: list[str] = []
    body: list[str] = []
    for mesh in meshes:
        body.append(f"o {mesh.part_name}")
        for v in mesh.vertices:
            body.append("v " + _fmt_row(v))
        corner_vt = None
        if mesh.uv is not None:
            corner_vt = []
            for uv in mesh.uv:
                key = _fmt_row(uv)
                if key not in vt_index:
                    vt_index[key] = len(vt_lines) + 1
                    vt_lines.append("vt " + key)
                corner_vt.append(vt_index[key])
        current = None
        for fi, tri in enumerate(mesh.triangles):
            slot = int(mesh.face_material[fi])
            if mesh.material_slots and slot != current:
                body.append(f"usemtl {mesh.material_slots[slot].name}")
                current = slot
            if corner_vt is None:
                body.append("f " + " ".join(str(int(i) + v_base) for i in tri))
            else:
                body.append("f " + " ".join(f"{int(i) + v_base}/{corner_vt[3 * fi + c]}" for c, i in enumerate(tri)))
        v_base += len(mesh.vertices)
    # vt lines are emitted before faces reference them; position in the file
    # does not matter to readers but keeps the output tidy.
    return "\n".join(lines + vt_lines + body) + "\n"


def mtl_text(materials: Iterable[MaterialSpec]) -> str:
    lines = ["# scenec materials"]
    seen = set()
    for mat in materials:
        if mat.name in seen:
            continue
        seen.add(mat.name)
        lines.append("")
        lines.append(f"newmtl {mat.name}")
        lines.append("Kd " + _fmt_row(mat.base_color))
        if mat.roughness is not None:
            lines.append("Pr " + fmt(mat.roughness))
        if mat.metallic is not None:
            lines.append("Pm " + fmt(mat.metallic))
        if mat.alpha is not None:
            lines.append("d " + fmt(mat.alpha))
        if mat.emission is not None:
            lines.append("Ke " + _fmt_row(mat.emission))
        if mat.normal_map is not None:
            lines.append(f"norm {mat.normal_map}")
        if mat.image_texture is not None:
            lines.append(f"map_Kd {mat.image_texture}")
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def parse_mtl(text: str) -> dict[str, MaterialSpec]:
    mats: dict[str, dict] = {}
    cur = None
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        key, args = parts[0], parts[1:]
        if key == "newmtl":
            cur = {"name": args[0]}
            mats[args[0]] = cur
        elif cur is None:
            continue
        elif key == "Kd":
            cur["base_color"] = tuple(float(a) for a in args[:3])
        elif key == "Pr":
            cur["roughness"] = float(args[0])
        elif key == "Pm":
            cur["metallic"] = float(args[0])
        elif key == "d":
            cur["alpha"] = float(args[0])
        elif key == "Ke":
            cur["emission"] = tuple(float(a) for a in args[:3])
        elif key == "norm":
            cur["normal_map"] = args[0]
        elif key == "map_Kd":
            cur["image_texture"] = args[0]
    return {name: MaterialSpec(**data) for name, data in mats.items()}


def parse_obj(text: str, materials: dict[str, MaterialSpec] | None = None) -> list[TriMesh]:
    """Read the subset of OBJ this package writes: v, vt, f (v or v/vt), o, usemtl."""
    materials = materials or {}
    verts: list[list[float]] = []
    vts: list[list[float]] = []
    groups: list[dict] = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        key, args = parts[0], parts[1:]
        try:
            if key == "v":
                verts.append([float(a) for a in args[:3]])
            elif key == "vt":
                vts.append([float(a) for a in args[:2]])
            elif key == "o" or key == "g":
                cur = {"name": args[0] if args else f"part_{len(groups)}", "faces": [], "fvt": [], "fmat": [], "slots": []}
                groups.append(cur)
            elif key == "usemtl":
                if cur is None:
                    cur = {"name": "part_0", "faces": [], "fvt": [], "fmat": [], "slots": []}
                    groups.append(cur)
                if args[0] not in cur["slots"]:
                    cur["slots"].append(args[0])
                cur["slot"] = cur["slots"].index(args[0])
            elif key == "f":
                if cur is None:
                    cur = {"name": "part_0", "faces": [], "fvt": [], "fmat": [], "slots": []}
                    groups.append(cur)
                if len(args) != 3:
                    raise LoadError(f"line {lineno}: only triangles are supported")
                idx = [a.split("/") for a in args]
                cur["faces"].append([int(i[0]) - 1 for i in idx])
                cur["fvt"].append([int(i[1]) - 1 if len(i) > 1 and i[1] else -1 for i in idx])
                cur["fmat"].append(cur.get("slot", 0))
        except (ValueError, IndexError) as exc:
            raise LoadError(f"line {lineno}: {exc}") from exc
    all_v = np.asarray(verts, dtype=float).reshape(-1, 3)
    all_vt = np.asarray(vts, dtype=float).reshape(-1, 2)
    out = []
    for g in groups:
        faces = np.asarray(g["faces"], dtype=np.int64).reshape(-1, 3)
        if faces.size == 0:
            continue
        if faces.min() < 0 or faces.max() >= len(all_v):
            raise LoadError(f"group {g['name']}: vertex index out of range")
        used, local = np.unique(faces, return_inverse=True)
        fvt = np.asarray(g["fvt"], dtype=np.int64).reshape(-1)
        uv = all_vt[fvt] if len(all_vt) and np.all(fvt >= 0) else None
        slots = [materials.get(name) or MaterialSpec(name) for name in g["slots"]]
        out.append(
            TriMesh(
                part_name=g["name"],
                vertices=all_v[used],
                triangles=local.reshape(-1, 3),
                uv=uv,
                material_slots=slots,
                face_material=np.asarray(g["fmat"], dtype=np.int64),
            )
        )
    return out


def load_obj(path, mtl_path=None) -> list[TriMesh]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        mats = {}
        if mtl_path is None:
            for line in text.splitlines():
                if line.startswith("mtllib "):
                    mtl_path = path.parent / line.split(None, 1)[1].strip()
                    break
        if mtl_path is not None and Path(mtl_path).exists():
            mats = parse_mtl(Path(mtl_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return parse_obj(text, mats)
