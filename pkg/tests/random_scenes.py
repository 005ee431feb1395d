"""Seeded small scenes that exercise every layout metric's edge cases: boxes
crossing floor edges, stacked and sunken objects, rugs, ceiling fixtures,
wall-hung items and doors or windows partly blocked by furniture."""

from __future__ import annotations

import math

import numpy as np

from scenec.core import RigidTransform, SupportRelation
from scenec.router import Strategy
from scenec.scene import Opening, Room
from scene_utils import box_mesh, house_with, make_object

GAPS = (0.0, 0.0, 0.002, 0.03, -0.01)


def _rooms(rng):
    w, d = rng.uniform(2.0, 4.5), rng.uniform(2.0, 4.5)
    h = rng.uniform(2.4, 3.0)
    rooms = [Room("a", ((0, 0), (w, 0), (w, d), (0, d)), h, _openings(rng, [w, d, w, d], h))]
    if rng.random() < 0.4:
        w2 = rng.uniform(1.5, 3.0)
        d2 = rng.uniform(1.0, d)
        rooms.append(Room("b", ((w, 0), (w + w2, 0), (w + w2, d2), (w, d2)), h, _openings(rng, [w2, d2, w2, d2], h)))
    return rooms


def _openings(rng, lengths, wall_height):
    out = []
    for _ in range(rng.integers(0, 3)):
        k = int(rng.integers(0, 4))
        width = rng.uniform(0.6, min(1.2, lengths[k] - 0.1))
        door = rng.random() < 0.5
        height = 2.0 if door else rng.uniform(0.6, 1.2)
        sill = 0.0 if door else rng.uniform(0.5, wall_height - height)
        offset = None if rng.random() < 0.3 else rng.uniform(width / 2, lengths[k] - width / 2)
        out.append(Opening("door" if door else "window", k, width, height, sill, offset))
    return tuple(out)


def _point_in(rng, rooms, margin):
    room = rooms[int(rng.integers(0, len(rooms)))]
    pts = np.array(room.floor_polygon)
    lo, hi = pts.min(axis=0) - margin, pts.max(axis=0) + margin
    return rng.uniform(lo, hi), room


def random_scene(rng, max_objects=10):
    rooms = _rooms(rng)
    objects = []
    for n in range(int(rng.integers(1, max_objects + 1))):
        oid = f"o{n}"
        roll = rng.random()
        yaw = rng.uniform(-math.pi, math.pi)
        size = rng.uniform(0.2, 1.0, 3)
        standing = [o for o in objects if o.support.kind.value == "ground" and o.route is not Strategy.THIN_COVER]
        if roll < 0.15 and standing:
            parent = standing[int(rng.integers(0, len(standing)))]
            top = parent.world_bbox.max[2]
            c = parent.world_bbox.center
            size = rng.uniform(0.05, 0.3, 3)
            z = top + GAPS[int(rng.integers(0, len(GAPS)))]
            tf = RigidTransform.from_yaw(yaw, (c[0], c[1], 0.0))
            meshes = [box_mesh(size, (0, 0, z + size[2] / 2))]
            objects.append(make_object(oid, meshes, tf, "lamp", Strategy.STRUCT_MANIP, SupportRelation("object", parent.id)))
            continue
        xy, room = _point_in(rng, rooms, 0.4)
        if roll < 0.3:
            size[2] = 0.01
            tf = RigidTransform.from_yaw(yaw, (xy[0], xy[1], 0.0))
            objects.append(make_object(oid, [box_mesh(size, (0, 0, 0.005))], tf, "rug", Strategy.THIN_COVER))
        elif roll < 0.42:
            size[2] = rng.uniform(0.1, 0.5)
            z = room.wall_height - GAPS[int(rng.integers(0, len(GAPS)))]
            tf = RigidTransform.from_yaw(yaw, (xy[0], xy[1], 0.0))
            meshes = [box_mesh(size, (0, 0, z - size[2] / 2))]
            objects.append(make_object(oid, meshes, tf, "chandelier", Strategy.STRUCT_MANIP, SupportRelation("ceiling")))
        elif roll < 0.55:
            k = int(rng.integers(0, len(room.floor_polygon)))
            a, b, inward = room.wall(k)
            s = rng.uniform(0.1, 0.9)
            gap = GAPS[int(rng.integers(0, len(GAPS)))]
            size[1] = rng.uniform(0.02, 0.1)
            # Local +y (the back) points out through the wall.
            wall_yaw = math.atan2(-inward[1], -inward[0]) - math.pi / 2
            p = a + s * (b - a) + inward * (gap + size[1] / 2)
            tf = RigidTransform.from_yaw(wall_yaw, (p[0], p[1], 0.0))
            meshes = [box_mesh(size, (0, 0, 1.5))]
            objects.append(
                make_object(oid, meshes, tf, "painting", Strategy.WALL_ART, SupportRelation("wall"), room=room.name)
            )
        else:
            z = GAPS[int(rng.integers(0, len(GAPS)))]
            tf = RigidTransform.from_yaw(yaw, (xy[0], xy[1], 0.0))
            objects.append(make_object(oid, [box_mesh(size, (0, 0, z + size[2] / 2))], tf, "cabinet"))
    return house_with(objects, rooms)
