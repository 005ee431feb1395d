import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from generators import buildable_program, random_transform
from oracles import closed_oracle, nme_oracle, uvi_oracle
from scenec.core import RigidTransform
from scenec.errors import DegenerateParams, ExecError, UnsupportedTopology, WidthTooLarge
from scenec.kernel.mesh import (
    MaterialSpec,
    is_closed,
    nonmanifold_edge_count,
    signed_volume,
    srgb_to_linear,
    surface_area,
    triangle_areas,
)
from scenec.kernel.modifiers import (
    bevel_edges,
    duplicate_part,
    generate_uv,
    mirror_about,
    planar_face_count,
    radial_array,
    solidify,
)
from scenec.kernel.objio import mtl_text, obj_text, parse_mtl, parse_obj
from scenec.kernel.primitives import make_box, make_cylinder, make_primitive, make_quad, make_sphere, make_torus
from scenec.metrics.asset import uv_islands
from scenec.program import CreatePrimitive, PartProgram, Solidify, execute_program

CLOSED_KINDS = {
    "box": {"size": [0.4, 0.3, 0.2]},
    "canvas": {"size": [0.6, 0.02, 0.4]},
    "cyl": {"radius": 0.1, "height": 0.3},
    "sph": {"radii": [0.2, 0.1, 0.15]},
    "torus": {"major": 0.3, "minor": 0.05},
    "curve": {"points": [[0, 0, 0], [0.2, 0, 0.1], [0.4, 0, 0]], "radius": 0.01},
}


def vol(m):
    return signed_volume(m.vertices, m.triangles)


@pytest.mark.parametrize("kind", sorted(CLOSED_KINDS))
def test_closed_primitives_are_manifold_and_outward(kind):
    m = make_primitive(kind, CLOSED_KINDS[kind])
    assert nonmanifold_edge_count(m) == 0 == nme_oracle(m.triangles)
    assert closed_oracle(m) and is_closed(m)
    assert vol(m) > 0


def test_box_volume_and_bounds():
    b = make_box([1, 2, 3])
    assert vol(b) == pytest.approx(6.0, abs=1e-12)
    assert np.allclose(b.aabb().min, [-0.5, -1, -1.5]) and np.allclose(b.aabb().max, [0.5, 1, 1.5])
    assert b.n_faces == 12


def test_cylinder_volume_converges():
    m = make_cylinder(1.0, 1.0, 256)
    assert vol(m) == pytest.approx(math.pi, rel=1e-3)


def test_sphere_volume_converges():
    m = make_sphere([1.0], [128, 64])
    assert vol(m) == pytest.approx(4 / 3 * math.pi, rel=2e-3)


def test_torus_bounds():
    box = make_torus(0.3, 0.1).aabb()
    assert np.allclose(box.max, [0.4, 0.4, 0.1])


@pytest.mark.parametrize("params", [{"size": [1, -1, 1]}, {"size": [0, 1, 1]}, {}])
def test_degenerate_box_rejected(params):
    with pytest.raises(DegenerateParams):
        make_primitive("box", params)


def test_curve_self_contact_rejected():
    with pytest.raises(DegenerateParams):
        make_primitive("curve", {"points": [[0, 0, 0], [1, 0, 0], [0, 0.01, 0]], "radius": 0.05})


def test_quad_is_open_patch():
    q = make_quad([1, 2])
    assert nonmanifold_edge_count(q) == 4


def test_mirror_offset_box():
    b = make_box([0.2, 0.2, 0.2]).transformed(RigidTransform.from_translation([0.5, 0, 0]))
    m = mirror_about(b, (0, 0, 0), (1, 0, 0))
    assert np.allclose(m.aabb().center, [-0.5, 0, 0])
    assert vol(m) == pytest.approx(vol(b))


def test_mirror_of_symmetric_mesh_is_fixed_point():
    b = make_box([0.4, 0.2, 0.2])
    m = mirror_about(b, (0, 0, 0), (1, 0, 0))
    key = lambda v: np.round(v, 9)[np.lexsort(np.round(v, 9).T)]  # noqa: E731
    assert np.allclose(key(m.vertices), key(b.vertices), atol=1e-9)


@given(st.integers(0, 10_000))
def test_mirror_is_involution(seed):
    rng = np.random.default_rng(seed)
    m = make_box(rng.uniform(0.1, 1, 3)).transformed(random_transform(rng))
    n = rng.normal(size=3)
    p = rng.uniform(-1, 1, 3)
    twice = mirror_about(mirror_about(m, p, n), p, n)
    assert np.allclose(twice.vertices, m.vertices, atol=1e-9)
    assert np.array_equal(twice.triangles, m.triangles)


def test_radial_half_turn():
    b = make_box([0.1, 0.1, 0.1]).transformed(RigidTransform.from_translation([1, 0, 0]))
    copies = radial_array(b, (0, 0, 0), (0, 0, 1), 2)
    assert np.allclose(copies[1].aabb().center, [-1, 0, 0], atol=1e-12)


def test_radial_count_one_rejected():
    with pytest.raises(DegenerateParams):
        radial_array(make_box([1, 1, 1]), (0, 0, 0), (0, 0, 1), 1)


@given(st.integers(2, 24))
def test_radial_centroids_evenly_spaced(count):
    b = make_box([0.05, 0.05, 0.05]).transformed(RigidTransform.from_translation([0.3, 0.1, 0.2]))
    copies = radial_array(b, (0, 0.1, 0), (0, 0, 1), count)
    assert len(copies) == count
    for k, c in enumerate(copies):
        center = c.vertices.mean(axis=0)
        ang = math.atan2(center[1] - 0.1, center[0])
        expect = 2 * math.pi * k / count
        assert abs((ang - expect + math.pi) % (2 * math.pi) - math.pi) < 1e-9
        assert math.hypot(center[0], center[1] - 0.1) == pytest.approx(0.3, abs=1e-9)


def test_solidify_hemishell_bowl():
    shell = make_primitive("hemishell", {"radii": [0.1]})
    bowl = solidify(shell, 0.005)
    assert nonmanifold_edge_count(bowl) == 0
    assert closed_oracle(bowl) and vol(bowl) > 0


def test_solidify_flat_patch_volume():
    slab = solidify(make_quad([1, 1]), 0.01)
    assert vol(slab) == pytest.approx(0.01, rel=0.01)
    assert nonmanifold_edge_count(slab) == 0


def test_solidify_open_box_volume():
    s = solidify(make_primitive("open_box", {"size": [1, 1, 1]}), 0.05)
    assert vol(s) == pytest.approx(1 - 0.9 * 0.9 * 0.95, rel=1e-9)


@pytest.mark.parametrize("t", [0.0, -0.1, float("nan")])
def test_solidify_needs_positive_thickness(t):
    with pytest.raises(DegenerateParams):
        solidify(make_quad([1, 1]), t)


def test_bevel_cube_face_pattern():
    cube = make_box([1, 1, 1])
    bev = bevel_edges(cube, 0.01, 1)
    assert planar_face_count(bev) == 26
    assert nonmanifold_edge_count(bev) == 0
    assert np.allclose(bev.aabb().min, cube.aabb().min) and np.allclose(bev.aabb().max, cube.aabb().max)


def test_bevel_zero_is_identity():
    cube = make_box([1, 1, 1])
    assert bevel_edges(cube, 0.0).equals(cube)


def test_bevel_too_wide():
    with pytest.raises(WidthTooLarge):
        bevel_edges(make_box([0.1, 1, 1]), 0.06)


def test_bevel_needs_convex_input():
    with pytest.raises(UnsupportedTopology):
        bevel_edges(make_torus(0.3, 0.1), 0.01)


def test_duplicate_is_independent():
    src = make_box([1, 1, 1])
    copy = duplicate_part(src, "copy")
    copy.vertices[0] += 5.0
    assert not np.allclose(src.vertices[0], copy.vertices[0])
    assert copy.part_name == "copy" and src.part_name == "box"


def test_uv_islands_per_kind():
    assert uv_islands(make_box([1, 1, 1])) == 1
    assert uv_islands(make_cylinder(0.2, 0.5)) == 3
    assert uv_islands(make_sphere([0.3])) == 1
    assert uv_islands(make_torus(0.3, 0.1)) == 1


def test_canvas_front_maps_to_unit_square():
    canvas = make_primitive("canvas", {"size": [0.8, 0.02, 0.5]})
    front = canvas.vertices[canvas.triangles].reshape(-1, 3)[:, 1] < -0.0099
    uv = canvas.uv[front]
    assert uv.min(axis=0).tolist() == [0.0, 0.0] and uv.max(axis=0).tolist() == [1.0, 1.0]


def test_uvs_in_unit_square():
    for kind, params in CLOSED_KINDS.items():
        uv = make_primitive(kind, params).uv
        assert uv.min() >= 0.0 and uv.max() <= 1.0, kind


def test_generate_uv_rejects_foreign_mesh():
    loaded = parse_obj(obj_text([make_box([1, 1, 1])]))[0]
    with pytest.raises(UnsupportedTopology):
        generate_uv(loaded, "box")


def test_srgb_conversion_endpoints():
    assert srgb_to_linear(0.0) == 0.0
    assert srgb_to_linear(1.0) == pytest.approx(1.0)
    assert srgb_to_linear(0.5) == pytest.approx(0.21404, abs=1e-5)


def test_obj_round_trip():
    m = make_cylinder(0.2, 0.4).with_(material_slots=[MaterialSpec("wood", roughness=0.5)])
    back = parse_obj(obj_text([m], "m.mtl"), parse_mtl(mtl_text(m.material_slots)))
    assert len(back) == 1
    assert np.allclose(back[0].vertices, m.vertices, atol=5e-7, rtol=0) and np.array_equal(back[0].triangles, m.triangles)
    assert back[0].material_slots[0].name == "wood"


def test_exec_error_carries_op_index():
    prog = PartProgram("p", (CreatePrimitive("open_box", {"size": [1, 1, 1]}), Solidify(0.0)))
    with pytest.raises(ExecError) as info:
        execute_program(prog)
    assert info.value.op_index == 1
    assert info.value.reason == "DegenerateParams"


@given(st.integers(0, 2**31))
def test_random_programs_stay_manifold_and_deterministic(seed):
    prog, first = buildable_program(np.random.default_rng(seed))
    second = execute_program(prog)
    for a, b in zip(first, second):
        assert nonmanifold_edge_count(a) == 0 == nme_oracle(a.triangles)
        assert triangle_areas(a.vertices, a.triangles).min() > 1e-12
        assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.uv, b.uv)
        assert uv_islands(a) == uvi_oracle(a)


@given(st.integers(0, 2**31))
def test_rigid_motion_conserves_measures(seed):
    rng = np.random.default_rng(seed)
    m = make_sphere(rng.uniform(0.05, 0.5, 3).tolist(), [12, 6])
    moved = m.transformed(random_transform(rng))
    assert vol(moved) == pytest.approx(vol(m), rel=1e-9)
    assert surface_area(moved) == pytest.approx(surface_area(m), rel=1e-9)


def test_bevelled_sphere_has_no_slivers():
    # Many planes meet at the poles; shrinking them apart leaves sub-micron edges.
    sph = make_primitive("sph", {"radii": [0.457, 0.491, 0.314]}, [21, 12])
    bev = bevel_edges(sph, 0.00057, 1)
    assert triangle_areas(bev.vertices, bev.triangles).min() > 1e-12
    assert nonmanifold_edge_count(bev) == 0
