import xml.etree.ElementTree as ET

import numpy as np
import pytest

from builders import built, sim_for
from scenec.backend.template import TEMPLATES
from scenec.errors import InvalidAsset, ParseError, SchemaError
from scenec.metrics.asset import asset_dir_metrics
from scenec.sdf import SDF_VERSION, emit_sdf, emit_urdf, load_asset_dir, parse_sdf, validate_document, write_asset_dir

TOL = 1e-6


def assert_same_model(doc, sim):
    """Names, masses, inertia and joint parameters agree within the print precision."""
    assert doc.version == SDF_VERSION and doc.model_name == sim.id
    assert [link.name for link in doc.links] == [link.name for link in sim.links]
    for parsed, link in zip(doc.links, sim.links):
        assert parsed.mass == pytest.approx(link.attrs.mass, abs=TOL)
        assert np.allclose(parsed.inertia, link.attrs.inertia, atol=TOL, rtol=0)
        assert np.allclose(parsed.com, link.attrs.com, atol=TOL, rtol=0)
        assert len(parsed.collisions) == len(link.attrs.collision_proxies)
        for got, box in zip(parsed.collisions, link.attrs.collision_proxies):
            assert np.allclose(got.center, box.center, atol=TOL)
            assert np.allclose(got.half_extents, box.half_extents, atol=TOL)
            assert np.allclose(got.corners(), box.corners(), atol=1e-5)
    assert [j.name for j in doc.joints] == [j.name for j in sim.joints]
    for parsed, joint in zip(doc.joints, sim.joints):
        assert (parsed.parent_link, parsed.child_link, parsed.joint_type) == (joint.parent_link, joint.child_link, joint.joint_type)
        assert np.allclose(parsed.axis, joint.axis, atol=TOL)
        assert np.allclose(parsed.limits, joint.limits, atol=TOL)
        assert parsed.origin.is_close(joint.origin, 1e-5)


@pytest.mark.parametrize("category", sorted(TEMPLATES))
def test_round_trip_every_template(category):
    sim = sim_for(category)
    doc = parse_sdf(emit_sdf(sim))
    assert_same_model(doc, sim)
    assert validate_document(doc) == []


def test_nightstand_joint_element():
    root = ET.fromstring(emit_sdf(sim_for("nightstand")))
    (joint,) = root.findall("model/joint")
    assert joint.get("type") == "prismatic"
    assert joint.findtext("axis/xyz") == "0.000000 -1.000000 0.000000"
    assert float(joint.findtext("axis/limit/lower")) == 0.0
    assert float(joint.findtext("axis/limit/upper")) == pytest.approx(0.4, abs=1e-6)


def test_rigid_table_document():
    doc = parse_sdf(emit_sdf(sim_for("table")))
    assert len(doc.links) == 1 and doc.joints == []


@pytest.mark.parametrize("category", ["table", "nightstand", "cabinet", "laptop"])
def test_urdf_matches_sdf_structure(category):
    sim = sim_for(category)
    robot = ET.fromstring(emit_urdf(sim))
    assert len(robot.findall("link")) == len(sim.links)
    joints = robot.findall("joint")
    assert len(joints) == len(parse_sdf(emit_sdf(sim)).joints)
    for el, joint in zip(joints, sim.joints):
        assert el.get("type") == joint.joint_type.value
        assert float(el.find("limit").get("upper")) == pytest.approx(joint.limits[1], abs=1e-6)


def test_emission_is_deterministic():
    assert emit_sdf(sim_for("cabinet")) == emit_sdf(sim_for("cabinet"))
    assert emit_urdf(sim_for("cabinet")) == emit_urdf(sim_for("cabinet"))


def test_truncated_document():
    text = emit_sdf(sim_for("nightstand"))
    with pytest.raises(ParseError):
        parse_sdf(text[: len(text) // 2])


def test_missing_inertial():
    text = emit_sdf(sim_for("table"))
    root = ET.fromstring(text)
    link = root.find("model/link")
    link.remove(link.find("inertial"))
    with pytest.raises(ParseError):
        parse_sdf(ET.tostring(root, encoding="unicode"))


def test_joint_to_missing_link():
    text = emit_sdf(sim_for("nightstand")).replace("<child>drawer</child>", "<child>ghost</child>")
    with pytest.raises(SchemaError):
        parse_sdf(text)


def test_wrong_root():
    with pytest.raises(ParseError):
        parse_sdf("<robot/>")


def test_asset_dir_round_trip(tmp_path):
    asset = built("nightstand")
    sim = sim_for("nightstand")
    out = write_asset_dir(tmp_path, sim, asset)
    doc, meshes = load_asset_dir(out)
    assert_same_model(doc, sim)
    assert sorted(meshes) == ["base_link", "drawer"]
    assert sum(len(ms) for ms in meshes.values()) == len(asset.parts)
    report = asset_dir_metrics(out)
    assert report.nme == 0 and report.fac == sum(m.n_faces for m in asset.parts)


def test_missing_asset_dir(tmp_path):
    with pytest.raises(InvalidAsset):
        load_asset_dir(tmp_path)
