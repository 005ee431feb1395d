"""SDF and URDF emission, SDF parsing, and the on-disk asset directory."""

from __future__ import annotations

import json
import os
import shutil
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from scenec.artic import JointSpec, JointType, Link, OrientedBox, SimAsset
from scenec.core import RigidTransform
from scenec.errors import InvalidAsset, ParseError, SchemaError
from scenec.kernel.objio import fmt, load_obj, mtl_text, obj_text, write_text
from scenec.program import ObjectAsset, programs_to_json

SDF_VERSION = "1.9"
MESH_DIR = "meshes"
MTL_NAME = "materials.mtl"
# Joint effort and velocity caps; the simulator needs finite values.
JOINT_EFFORT = 100.0
JOINT_VELOCITY = 1.0


def _row(values) -> str:
    return " ".join(fmt(v) for v in values)


def _pose_text(translation, rpy) -> str:
    return f"{_row(translation)} {_row(rpy)}"


def _rpy(rotation: np.ndarray) -> np.ndarray:
    return RigidTransform(rotation).rpy()


def _inertia_entries(inertia: np.ndarray) -> dict:
    return {
        "ixx": inertia[0, 0],
        "ixy": inertia[0, 1],
        "ixz": inertia[0, 2],
        "iyy": inertia[1, 1],
        "iyz": inertia[1, 2],
        "izz": inertia[2, 2],
    }


def _sub(parent: ET.Element, tag: str, text: str | None = None, **attrs) -> ET.Element:
    el = ET.SubElement(parent, tag, {k: str(v) for k, v in attrs.items()})
    if text is not None:
        el.text = text
    return el


def mesh_uri(link_name: str) -> str:
    return f"{MESH_DIR}/{link_name}.obj"


def _sdf_link(model: ET.Element, link: Link) -> None:
    el = _sub(model, "link", name=link.name)
    _sub(el, "pose", _pose_text((0, 0, 0), (0, 0, 0)))
    inertial = _sub(el, "inertial")
    _sub(inertial, "pose", _pose_text(link.attrs.com, (0, 0, 0)))
    _sub(inertial, "mass", fmt(link.attrs.mass))
    inertia = _sub(inertial, "inertia")
    for key, value in _inertia_entries(link.attrs.inertia).items():
        _sub(inertia, key, fmt(value))
    visual = _sub(el, "visual", name=f"{link.name}_visual")
    _sub(_sub(_sub(visual, "geometry"), "mesh"), "uri", mesh_uri(link.name))
    for i, box in enumerate(link.attrs.collision_proxies):
        col = _sub(el, "collision", name=f"{link.name}_collision_{i}")
        _sub(col, "pose", _pose_text(box.center, _rpy(box.rotation)))
        _sub(_sub(_sub(col, "geometry"), "box"), "size", _row(2.0 * box.half_extents))


def _sdf_joint(model: ET.Element, joint: JointSpec) -> None:
    el = _sub(model, "joint", name=joint.name, type=joint.joint_type.value)
    # Link frames coincide with the model frame, so the model-frame origin is
    # also the origin relative to the child link.
    _sub(el, "pose", _pose_text(joint.origin.translation, joint.origin.rpy()))
    _sub(el, "parent", joint.parent_link)
    _sub(el, "child", joint.child_link)
    axis = _sub(el, "axis")
    _sub(axis, "xyz", _row(joint.axis))
    limit = _sub(axis, "limit")
    _sub(limit, "lower", fmt(joint.limits[0]))
    _sub(limit, "upper", fmt(joint.limits[1]))
    _sub(limit, "effort", fmt(JOINT_EFFORT))
    _sub(limit, "velocity", fmt(JOINT_VELOCITY))


def _xml_text(root: ET.Element) -> str:
    ET.indent(root, space="  ")
    return '<?xml version="1.0" ?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def emit_sdf(sim: SimAsset) -> str:
    root = ET.Element("sdf", version=SDF_VERSION)
    model = _sub(root, "model", name=sim.id or "object")
    _sub(model, "static", "false")
    for link in sim.links:
        _sdf_link(model, link)
    for joint in sim.joints:
        _sdf_joint(model, joint)
    return _xml_text(root)


def emit_urdf(sim: SimAsset) -> str:
    root = ET.Element("robot", name=sim.id or "object")
    for link in sim.links:
        el = _sub(root, "link", name=link.name)
        inertial = _sub(el, "inertial")
        _sub(inertial, "origin", xyz=_row(link.attrs.com), rpy=_row((0, 0, 0)))
        _sub(inertial, "mass", value=fmt(link.attrs.mass))
        _sub(inertial, "inertia", **{k: fmt(v) for k, v in _inertia_entries(link.attrs.inertia).items()})
        visual = _sub(el, "visual")
        _sub(_sub(visual, "geometry"), "mesh", filename=mesh_uri(link.name))
        for box in link.attrs.collision_proxies:
            col = _sub(el, "collision")
            _sub(col, "origin", xyz=_row(box.center), rpy=_row(_rpy(box.rotation)))
            _sub(_sub(col, "geometry"), "box", size=_row(2.0 * box.half_extents))
    for joint in sim.joints:
        el = _sub(root, "joint", name=joint.name, type=joint.joint_type.value)
        _sub(el, "origin", xyz=_row(joint.origin.translation), rpy=_row(joint.origin.rpy()))
        _sub(el, "parent", link=joint.parent_link)
        _sub(el, "child", link=joint.child_link)
        _sub(el, "axis", xyz=_row(joint.axis))
        _sub(el, "limit", lower=fmt(joint.limits[0]), upper=fmt(joint.limits[1]), effort=fmt(JOINT_EFFORT), velocity=fmt(JOINT_VELOCITY))
    return _xml_text(root)


# -- parsing ---------------------------------------------------------------------------


@dataclass
class SdfLink:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    mesh_uris: list
    collisions: list


@dataclass
class SdfDocument:
    version: str
    model_name: str
    links: list
    joints: list = field(default_factory=list)

    def link(self, name: str) -> SdfLink:
        for link in self.links:
            if link.name == name:
                return link
        raise KeyError(name)

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    def root_links(self) -> list[str]:
        children = {j.child_link for j in self.joints}
        return [link.name for link in self.links if link.name not in children]


def _floats(text: str | None, n: int, where: str) -> np.ndarray:
    try:
        values = np.array([float(v) for v in (text or "").split()])
    except ValueError:
        raise ParseError(f"{where}: expected numbers, got {text!r}") from None
    if values.shape != (n,):
        raise ParseError(f"{where}: expected {n} numbers, got {text!r}")
    return values


def _pose(el: ET.Element | None, where: str) -> RigidTransform:
    if el is None:
        return RigidTransform()
    v = _floats(el.text, 6, where)
    return RigidTransform(Rotation.from_euler("xyz", v[3:]).as_matrix(), v[:3])


def _need(el: ET.Element, tag: str, where: str) -> ET.Element:
    child = el.find(tag)
    if child is None:
        raise ParseError(f"{where}: missing <{tag}>")
    return child


def parse_sdf(text: str) -> SdfDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed SDF XML: {exc}") from None
    if root.tag != "sdf":
        raise ParseError(f"root element is <{root.tag}>, expected <sdf>")
    model = _need(root, "model", "sdf")
    links = []
    for el in model.findall("link"):
        name = el.get("name", "")
        where = f"link {name}"
        inertial = _need(el, "inertial", where)
        mass = float(_need(inertial, "mass", where).text)
        com = _pose(inertial.find("pose"), where).translation
        ent = {k: float(_need(_need(inertial, "inertia", where), k, where).text) for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
        inertia = np.array(
            [
                [ent["ixx"], ent["ixy"], ent["ixz"]],
                [ent["ixy"], ent["iyy"], ent["iyz"]],
                [ent["ixz"], ent["iyz"], ent["izz"]],
            ]
        )
        uris = [u.text for u in el.findall("visual/geometry/mesh/uri")]
        cols = []
        for col in el.findall("collision"):
            pose = _pose(col.find("pose"), where)
            size = _floats(_need(col, "geometry/box/size", where).text, 3, where)
            cols.append(OrientedBox(pose.translation, size / 2.0, pose.rotation, col.get("name", "")))
        links.append(SdfLink(name, mass, com, inertia, uris, cols))
    joints = []
    for el in model.findall("joint"):
        name = el.get("name", "")
        where = f"joint {name}"
        axis_el = _need(el, "axis", where)
        limit = _need(axis_el, "limit", where)
        joints.append(
            JointSpec(
                name,
                _need(el, "parent", where).text,
                _need(el, "child", where).text,
                JointType(el.get("type")),
                _pose(el.find("pose"), where),
                tuple(_floats(_need(axis_el, "xyz", where).text, 3, where)),
                (float(_need(limit, "lower", where).text), float(_need(limit, "upper", where).text)),
            )
        )
    names = {link.name for link in links}
    for joint in joints:
        for end in (joint.parent_link, joint.child_link):
            if end not in names:
                raise SchemaError(f"joint {joint.name} references unknown link {end!r}")
    return SdfDocument(root.get("version", ""), model.get("name", ""), links, joints)


def validate_document(doc: SdfDocument) -> list[str]:
    """Problems that would stop a simulator from loading the model."""
    problems = []
    names = [link.name for link in doc.links]
    if len(set(names)) != len(names):
        problems.append("duplicate link names")
    for joint in doc.joints:
        for end in (joint.parent_link, joint.child_link):
            if end not in names:
                problems.append(f"joint {joint.name} references unknown link {end}")
    children = [j.child_link for j in doc.joints]
    if len(set(children)) != len(children):
        problems.append("a link has more than one parent joint")
    if len(doc.root_links()) != 1:
        problems.append(f"expected one root link, found {doc.root_links()}")
    for link in doc.links:
        if not link.mass > 0:
            problems.append(f"link {link.name} has non-positive mass")
        if np.linalg.eigvalsh(link.inertia).min() < -1e-9:
            problems.append(f"link {link.name} has an indefinite inertia tensor")
    return problems


# -- asset directory -----------------------------------------------------------------------


def write_asset_dir(root: str | Path, sim: SimAsset, asset: ObjectAsset) -> Path:
    """Write ``<root>/<id>/`` with SDF, URDF, per-link OBJ meshes, materials,
    the plan and the part programs. Files are replaced atomically."""
    out = Path(root) / asset.id
    mats = [m for link in sim.links for mesh in link.meshes for m in mesh.material_slots]
    write_text(out / MTL_NAME, mtl_text(mats))
    for link in sim.links:
        write_text(out / mesh_uri(link.name), obj_text(link.meshes, f"../{MTL_NAME}"))
    write_text(out / "plan.json", asset.plan.to_json() + "\n")
    write_text(out / "programs.json", programs_to_json(asset.programs) + "\n")
    write_text(out / "model.urdf", emit_urdf(sim))
    write_text(out / "model.sdf", emit_sdf(sim))
    return out


def publish_asset_dir(base: str | Path, sim: SimAsset, asset: ObjectAsset) -> Path:
    """Build ``<base>/<id>/`` beside its final location and swap it in, so readers
    see either the old directory or the complete new one."""
    base = Path(base)
    staging = base / f".{asset.id}.staging"
    old = base / f".{asset.id}.old"
    for tmp in (staging, old):
        if tmp.exists():
            shutil.rmtree(tmp)
    built = write_asset_dir(staging, sim, asset)
    final = base / asset.id
    if final.exists():
        os.replace(final, old)
    os.replace(built, final)
    shutil.rmtree(staging, ignore_errors=True)
    shutil.rmtree(old, ignore_errors=True)
    return final


def load_asset_dir(path: str | Path) -> tuple[SdfDocument, dict]:
    """Parse ``model.sdf`` and load each link's mesh; returns (document, {link: meshes})."""
    path = Path(path)
    sdf_path = path / "model.sdf"
    if not sdf_path.exists():
        raise InvalidAsset(f"{path}: no model.sdf")
    doc = parse_sdf(sdf_path.read_text(encoding="utf-8"))
    meshes = {}
    for link in doc.links:
        loaded = []
        for uri in link.mesh_uris:
            loaded.extend(load_obj(path / uri, path / MTL_NAME))
        meshes[link.name] = loaded
    return doc, meshes


def asset_manifest(sim: SimAsset) -> str:
    return json.dumps(
        {
            "id": sim.id,
            "route": sim.route.value,
            "links": [link.name for link in sim.links],
            "joints": [j.to_dict() for j in sim.joints],
            "total_mass": sim.total_mass,
            "warnings": list(sim.warnings),
        },
        indent=2,
        sort_keys=True,
    )
