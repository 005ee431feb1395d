import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from generators import buildable_program
from oracles import acc_oracle, col_oracle, nav_oracle, nme_oracle, oob_oracle, opc_oracle, sup_oracle, uvi_oracle
from random_scenes import random_scene
from scene_utils import box_mesh, box_object, house_with, make_object, threshold_house
from scenec.core import RigidTransform, SupportRelation
from scenec.errors import DegenerateFloor, UnknownRelationType
from scenec.kernel.mesh import MaterialSpec, TriMesh, nonmanifold_edge_count
from scenec.kernel.primitives import make_box, make_quad
from scenec.metrics import object_metrics, scene_report, uv_islands
from scenec.metrics.layout import (
    accessibility_metric,
    collision_metric,
    floor_grid,
    nav_metric,
    oob_flagged,
    oob_metric,
    opening_clearance_metric,
    relation_check,
    sample_points,
    sample_seed,
    support_metric,
)
from scenec.router import Strategy, default_ontology
from scenec.scene import Opening, rectangular_room

ONT = default_ontology()
SCENE_SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


def scene(seed):
    return random_scene(np.random.default_rng(seed))


def sides_of(house):
    out = {}
    for obj in house.objects.values():
        entry = ONT.lookup(obj.category)
        out[obj.category] = entry.functional_sides if entry else ()
    return out


# -- object metrics ------------------------------------------------------------------


def test_cube_asset_report():
    cube = make_box([1, 1, 1]).with_(material_slots=[MaterialSpec("wood", roughness=0.5)])
    rep = object_metrics([cube])
    assert (rep.mat, rep.nme, rep.fac, rep.vtx, rep.uvi) == (1, 0, 12, 8, 1)
    assert rep.pbr == pytest.approx(2 / 6)


def test_unused_material_slot_not_counted():
    cube = make_box([1, 1, 1]).with_(material_slots=[MaterialSpec("a"), MaterialSpec("b")])
    assert object_metrics([cube]).mat == 1


def test_quad_has_four_boundary_edges():
    assert object_metrics([make_quad([1, 1])]).nme == 4


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_nme_and_uvi_match_oracles_on_kernel_meshes(seed):
    _, meshes = buildable_program(np.random.default_rng(seed))
    for m in meshes:
        assert nonmanifold_edge_count(m) == nme_oracle(m.triangles)
        assert uv_islands(m) == uvi_oracle(m)


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_nme_and_uvi_match_oracles_on_triangle_soup(seed):
    # Few vertices and many faces, so edges with 1, 2 and 3+ faces all show up.
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(4, 12))
    tris = np.array([rng.choice(nv, 3, replace=False) for _ in range(int(rng.integers(1, 30)))])
    uv = rng.integers(0, 3, size=(3 * len(tris), 2)).astype(float)
    m = TriMesh("soup", rng.uniform(-1, 1, (nv, 3)), tris, uv)
    assert nonmanifold_edge_count(m) == nme_oracle(m.triangles)
    assert uv_islands(m) == uvi_oracle(m)


# -- collisions ----------------------------------------------------------------------


def test_separated_boxes_do_not_collide():
    h = house_with([box_object("a", (1, 1, 1), (0, 0, 0.5)), box_object("b", (1, 1, 1), (1.1, 0, 0.5))])
    assert collision_metric(h) == (0.0, [])


def test_overlapping_boxes_collide():
    h = house_with([box_object("a", (1, 1, 1), (0, 0, 0.5)), box_object("b", (1, 1, 1), (0.95, 0, 0.5))])
    assert collision_metric(h) == (1.0, [("a", "b")])


def test_resting_contact_is_not_collision():
    h = house_with([box_object("a", (1, 1, 1), (0, 0, 0.5)), box_object("b", (0.3, 0.3, 0.3), (0, 0, 1.15))])
    assert collision_metric(h)[0] == 0.0


def test_shallow_sink_within_tolerance():
    h = house_with([box_object("a", (1, 1, 1), (0, 0, 0.5)), box_object("b", (0.3, 0.3, 0.3), (0, 0, 1.1505))])
    assert collision_metric(h)[0] == 0.0


def test_enclosed_object_collides():
    h = house_with([box_object("big", (1, 1, 1), (0, 0, 0.5)), box_object("small", (0.1, 0.1, 0.1), (0, 0, 0.5))])
    assert collision_metric(h) == (1.0, [("big", "small")])


def test_third_object_dilutes_fraction():
    objs = [box_object("a", (1, 1, 1), (0, 0, 0.5)), box_object("b", (1, 1, 1), (0.5, 0, 0.5))]
    objs.append(box_object("c", (0.2, 0.2, 0.2), (1.5, 1.5, 0.1)))
    assert collision_metric(house_with(objs))[0] == pytest.approx(2 / 3)


def test_empty_house_metrics():
    h = house_with([])
    assert collision_metric(h) == (0.0, [])
    assert oob_metric(h) == (0.0, [])
    assert nav_metric(h) == 1.0
    assert support_metric(h) == (1.0, [])


@given(seeds)
@SCENE_SETTINGS
def test_collision_matches_oracle(seed):
    h = scene(seed)
    frac, pairs = collision_metric(h)
    assert (frac, set(pairs)) == col_oracle(h)


# -- out of bounds -------------------------------------------------------------------


def test_object_inside_floor_not_flagged():
    assert oob_metric(house_with([box_object("a", (0.5, 0.5, 0.5), (0, 0, 0.25))])) == (0.0, [])


def test_object_on_floor_edge_flagged():
    assert oob_metric(house_with([box_object("a", (0.5, 0.5, 0.5), (2.0, 0, 0.25))])) == (1.0, ["a"])


def test_oob_threshold_is_fewer_than_99_percent():
    assert not oob_flagged(99, 100)
    assert oob_flagged(98, 100)
    assert not oob_flagged(254, 256)  # 99.2%
    assert oob_flagged(253, 256)  # 98.8%


@pytest.mark.parametrize("inside,flagged", [(100, False), (99, False), (98, True)])
def test_oob_threshold_on_placed_object(inside, flagged):
    frac, ids = oob_metric(threshold_house(inside), samples_per_object=100)
    assert (frac == 1.0) is flagged and (ids == ["probe"]) is flagged


def test_sampling_is_seeded_per_object():
    m = [box_mesh((1, 1, 1))]
    assert np.array_equal(sample_points(m, 64, sample_seed("x")), sample_points(m, 64, sample_seed("x")))
    assert not np.array_equal(sample_points(m, 64, sample_seed("x")), sample_points(m, 64, sample_seed("y")))


@given(seeds)
@SCENE_SETTINGS
def test_oob_matches_oracle(seed):
    h = scene(seed)
    pts = {i: sample_points(o.world_meshes(), 256, sample_seed(i, 0)) for i, o in h.objects.items()}
    frac, flagged = oob_metric(h)
    assert (frac, set(flagged)) == oob_oracle(h, pts)


# -- navigability --------------------------------------------------------------------


def test_empty_room_fully_navigable():
    assert nav_metric(house_with([])) == 1.0


def test_wall_to_wall_divider_halves_nav():
    # The 4 m room has 80 cell columns; a 0.1 m divider at the center covers two of them.
    h = house_with([box_object("wall", (0.1, 4.2, 1.0), (0, 0, 0.5))])
    assert nav_metric(h) == pytest.approx(0.5)


def test_fully_covered_floor_has_zero_nav():
    assert nav_metric(house_with([box_object("slab", (5, 5, 0.1), (0, 0, 0.05))])) == 0.0


def test_rugs_and_ceiling_fixtures_are_not_obstacles():
    rug = make_object("rug", [box_mesh((5, 0.5, 0.01), (0, 0, 0.005))], route=Strategy.THIN_COVER)
    lamp = make_object("lamp", [box_mesh((5, 0.5, 0.3), (0, 0, 2.5))], support=SupportRelation("ceiling"))
    assert nav_metric(house_with([rug, lamp])) == 1.0


def test_house_without_rooms_is_degenerate():
    with pytest.raises(DegenerateFloor):
        floor_grid(house_with([], rooms=[]))


@given(seeds)
@SCENE_SETTINGS
def test_nav_matches_oracle(seed):
    h = scene(seed)
    assert nav_metric(h) == nav_oracle(h)


def test_nav_can_rise_when_an_obstacle_fills_a_pocket():
    # NAV is not monotone: filling the small side room leaves one connected region.
    divider = box_object("divider", (0.1, 4.2, 1.0), (1.0, 0, 0.5))
    before = nav_metric(house_with([divider]))
    filler = box_object("filler", (1.0, 4.2, 1.0), (1.55, 0, 0.5))
    after = nav_metric(house_with([divider, filler]))
    assert before < 1.0 and after == 1.0


@given(seeds, st.floats(-2, 2), st.floats(-2, 2), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
@SCENE_SETTINGS
def test_nav_never_rises_when_obstacle_stays_inside_main_region(seed, x, y, w, d):
    # Restricted monotonicity: if the new footprint only removes cells from the
    # largest region and that region stays largest, NAV cannot increase.
    h = scene(seed)
    grid = floor_grid(h)
    block = box_object("new", (w, d, 0.5), (x, y, 0.25))
    h2 = house_with(list(h.objects.values()) + [block], h.rooms)
    grid2 = floor_grid(h2)
    removed = grid.free & ~grid2.free
    main = grid.labels == grid.largest
    if grid.free.sum() == 0 or not removed.any() or np.any(removed & ~main):
        return
    if (grid2.labels == grid2.largest).sum() != main.sum() - removed.sum():
        return
    assert grid2.nav <= grid.nav + 1e-15


# -- support -------------------------------------------------------------------------


def table_and_lamp(gap):
    table = box_object("table", (1.0, 0.6, 0.75), (0, 0, 0.375))
    lamp = box_object("lamp", (0.2, 0.2, 0.4), (0.1, 0, 0.75 + gap + 0.2), support=SupportRelation("object", "table"))
    return house_with([table, lamp])


def test_lamp_resting_on_table_supported():
    assert support_metric(table_and_lamp(0.0)) == (1.0, [])


def test_lamp_floating_5cm_unsupported():
    assert support_metric(table_and_lamp(0.05)) == (0.5, ["lamp"])


def test_small_gap_within_tolerance():
    assert support_metric(table_and_lamp(0.004))[0] == 1.0


def test_missing_parent_unsupported():
    h = table_and_lamp(0.0)
    del h.objects["table"]
    assert support_metric(h) == (0.0, ["lamp"])


def test_wall_and_ceiling_supports():
    art = box_object("art", (0.6, 0.03, 0.4), (0, 2.0 - 0.015, 1.5), support=SupportRelation("wall"))
    fan = box_object("fan", (0.6, 0.6, 0.2), (0, 0, 2.7 - 0.1), support=SupportRelation("ceiling"))
    off = box_object("off", (0.6, 0.03, 0.4), (1.0, 1.9, 1.5), support=SupportRelation("wall"))
    frac, bad = support_metric(house_with([art, fan, off], [rectangular_room("room", 4, 4, 2.7)]))
    assert bad == ["off"] and frac == pytest.approx(2 / 3)


@given(seeds)
@SCENE_SETTINGS
def test_support_matches_oracle(seed):
    h = scene(seed)
    frac, bad = support_metric(h)
    assert (frac, set(bad)) == sup_oracle(h)


# -- accessibility -------------------------------------------------------------------


def test_sofa_with_clear_front_accessible():
    sofa = box_object("sofa", (2.0, 0.9, 0.8), (0, 1.0, 0.4), category="sofa")
    assert accessibility_metric(house_with([sofa]), ONT) == (1.0, [])


def test_wardrobe_facing_wall_inaccessible():
    # Yawed half a turn, its front looks at the +y wall 5 cm away.
    tf = RigidTransform.from_yaw(math.pi, (0, 2.0 - 0.05 - 0.3, 0))
    wardrobe = make_object("wardrobe", [box_mesh((1.2, 0.6, 2.0), (0, 0, 1.0))], tf, category="wardrobe")
    assert accessibility_metric(house_with([wardrobe]), ONT) == (0.0, ["wardrobe"])


def test_object_on_furniture_not_judged():
    table = box_object("t", (1, 1, 0.7), (0, 0, 0.35), category="lamp")
    cab = box_object("c", (0.4, 0.3, 0.3), (0, 0, 0.85), category="cabinet", support=SupportRelation("object", "t"))
    assert accessibility_metric(house_with([table, cab]), ONT) == (None, [])


@given(seeds)
@SCENE_SETTINGS
def test_accessibility_matches_oracle(seed):
    h = scene(seed)
    frac, blocked = accessibility_metric(h, ONT)
    assert (frac, set(blocked)) == acc_oracle(h, sides_of(h))


# -- openings ------------------------------------------------------------------------


def door_room():
    return rectangular_room("room", 4, 4, openings=[Opening("door", 0, 0.9, 2.0)])


def test_door_with_clear_surroundings():
    assert opening_clearance_metric(house_with([], [door_room()])) == (0.0, [])


def test_cabinet_overlapping_clearance_by_1cm_blocks():
    # Clearance runs from y=-2 to y=-1.25; the cabinet's front edge sits at -1.26.
    cab = box_object("cab", (0.8, 0.5, 1.0), (0, -1.26 + 0.25, 0.5))
    assert opening_clearance_metric(house_with([cab], [door_room()])) == (1.0, [("room", 0)])


def test_rug_under_door_does_not_block():
    rug = make_object("rug", [box_mesh((1, 1, 0.01), (0, -1.5, 0.005))], route=Strategy.THIN_COVER)
    assert opening_clearance_metric(house_with([rug], [door_room()]))[0] == 0.0


def test_low_cabinet_below_window_does_not_block():
    room = rectangular_room("room", 4, 4, openings=[Opening("window", 0, 1.0, 1.0, 1.0)])
    cab = box_object("cab", (0.8, 0.4, 0.8), (0, -1.75, 0.4))
    assert opening_clearance_metric(house_with([cab], [room]))[0] == 0.0


def test_no_openings_not_applicable():
    assert opening_clearance_metric(house_with([])) == (None, [])


@given(seeds)
@SCENE_SETTINGS
def test_opening_clearance_matches_oracle(seed):
    h = scene(seed)
    frac, blocked = opening_clearance_metric(h)
    assert (frac, set(blocked)) == opc_oracle(h)


# -- relations -----------------------------------------------------------------------


def relation_house():
    sofa = box_object("sofa", (2.0, 0.9, 0.8), (0, 2.0 - 0.02 - 0.45, 0.4), category="sofa")
    rug = make_object("rug", [box_mesh((1.5, 0.8, 0.01), (0, 0, 0.005))], route=Strategy.THIN_COVER, category="rug")
    table = box_object("table", (1.0, 0.6, 0.45), (0, 0.75, 0.225))
    lamp = box_object("lamp", (0.2, 0.2, 0.3), (0.3, 0.75, 0.6), support=SupportRelation("object", "table"))
    side = box_object("side", (0.4, 0.4, 0.5), (1.4, 1.5, 0.25))
    return house_with([sofa, rug, table, lamp, side])


@pytest.mark.parametrize(
    "rel,expected",
    [
        ({"type": "against_wall", "subject": "sofa"}, True),
        ({"type": "against_wall", "subject": "table"}, False),
        ({"type": "in_middle_of_room", "subject": "rug"}, True),
        ({"type": "in_middle_of_room", "subject": "side"}, False),
        ({"type": "in_front_of", "subject": "table", "reference": "sofa"}, True),
        ({"type": "behind", "subject": "table", "reference": "sofa"}, False),
        ({"type": "left_of", "subject": "side", "reference": "sofa"}, True),
        ({"type": "right_of", "subject": "side", "reference": "sofa"}, False),
        ({"type": "next_to", "subject": "side", "reference": "sofa"}, True),
        ({"type": "next_to", "subject": "rug", "reference": "table"}, True),
        ({"type": "next_to", "subject": "rug", "reference": "side"}, False),
        ({"type": "above", "subject": "lamp", "reference": "table"}, True),
        ({"type": "on_top_of", "subject": "lamp", "reference": "table"}, True),
        ({"type": "on_top_of", "subject": "table", "reference": "rug"}, False),
        ({"type": "faces", "subject": "sofa", "reference": "table"}, True),
        ({"type": "faces", "subject": "table", "reference": "side"}, False),
    ],
)
def test_relation_predicates(rel, expected):
    (verdict,) = relation_check(relation_house(), [rel])
    assert verdict["satisfied"] is expected
    assert verdict["relation"] == rel["type"] and verdict["subject"] == rel["subject"]


def test_unknown_relation_type():
    with pytest.raises(UnknownRelationType):
        relation_check(relation_house(), [{"type": "beside", "subject": "sofa", "reference": "rug"}])


# -- report --------------------------------------------------------------------------


def test_scene_report_fields():
    h = relation_house()
    rep = scene_report(h, ONT, relations=[{"type": "against_wall", "subject": "sofa"}])
    d = rep.to_dict()
    for key in ("col", "oob", "nav", "sup", "acc"):
        assert 0.0 <= d[key] <= 1.0
    assert d["opc"] is None
    assert d["relations"][0]["satisfied"] is True
    assert d["details"]["col_pairs"] == []


def test_scene_report_subset():
    rep = scene_report(relation_house(), ONT, metrics=("nav",))
    assert rep.nav is not None and rep.col is None and rep.sup is None
