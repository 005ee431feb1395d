"""Deterministic planner backend built from parametric plan templates.

Every template is a function of the target dims ``(w, d, h)`` that lays the
parts out so their union box equals the target, which keeps placement scale
factors at 1.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from scenec.backend.base import Capabilities, PlannerBackend
from scenec.errors import Unsupported
from scenec.plan import ObjectPlan, Provenance, plan_union_aabb
from scenec.program import Bevel, CreatePrimitive, PartProgram, Solidify, with_ops
from scenec.router import CategoryOntology, default_ontology
from scenec.verifier import scale_part_tree

_S = math.sqrt(0.5)
ROT_X90 = [_S, 0.0, 0.0, _S]  # cylinder axis onto -y
ROT_X180 = [1.0, 0.0, 0.0, 0.0]


def _yaw_quat(deg: float) -> list:
    a = math.radians(deg) / 2
    return [0.0, 0.0, math.sin(a), math.cos(a)]


def _mat(name, family, color, roughness=None, metallic=None, **extra) -> dict:
    out = {"name": name, "family": family, "base_color": list(color)}
    if roughness is not None:
        out["roughness"] = roughness
    if metallic is not None:
        out["metallic"] = metallic
    out.update(extra)
    return out


PALETTES = [
    {
        "wood": _mat("oak", "wood", (0.55, 0.38, 0.22), 0.6),
        "dark_wood": _mat("walnut", "wood", (0.30, 0.19, 0.11), 0.55),
        "metal": _mat("steel", "metal", (0.62, 0.62, 0.64), 0.3, 1.0),
        "fabric": _mat("linen", "fabric", (0.72, 0.68, 0.60), 0.9),
        "plastic": _mat("white_plastic", "plastic", (0.85, 0.85, 0.85), 0.4),
        "ceramic": _mat("glazed_ceramic", "ceramic", (0.90, 0.88, 0.82), 0.2),
        "glass": _mat("clear_glass", "glass", (0.80, 0.85, 0.90), 0.05, 0.0, alpha=0.3),
        "paper": _mat("print_paper", "plastic", (0.95, 0.93, 0.88), 0.8),
        "leaf": _mat("leaf_green", "plastic", (0.18, 0.45, 0.16), 0.7),
        "screen": _mat("screen_black", "glass", (0.02, 0.02, 0.03), 0.1, 0.0, emission=(0.0, 0.0, 0.0)),
    },
    {
        "wood": _mat("birch", "wood", (0.78, 0.66, 0.50), 0.6),
        "dark_wood": _mat("teak", "wood", (0.45, 0.28, 0.15), 0.5),
        "metal": _mat("brass", "metal", (0.78, 0.62, 0.30), 0.35, 1.0),
        "fabric": _mat("wool_grey", "fabric", (0.45, 0.45, 0.47), 0.95),
        "plastic": _mat("black_plastic", "plastic", (0.08, 0.08, 0.09), 0.5),
        "ceramic": _mat("terracotta", "ceramic", (0.70, 0.36, 0.22), 0.7),
        "glass": _mat("tinted_glass", "glass", (0.55, 0.65, 0.62), 0.05, 0.0, alpha=0.4),
        "paper": _mat("canvas_cloth", "fabric", (0.90, 0.86, 0.78), 0.85),
        "leaf": _mat("leaf_olive", "plastic", (0.33, 0.42, 0.18), 0.7),
        "screen": _mat("screen_grey", "glass", (0.05, 0.05, 0.06), 0.1, 0.0, emission=(0.0, 0.0, 0.0)),
    },
]


def part(name, primitive, dims, at, material, *, rot=None, role=None, **extra) -> dict:
    pose = {"translation": [float(v) for v in at]}
    if rot is not None:
        pose["rotation"] = [float(v) for v in rot]
    out = {"name": name, "primitive": primitive, "dims": [float(v) for v in dims], "local_pose": pose, "material": material}
    if role:
        out["role"] = role
    out.update(extra)
    return out


def knob(name, depth, diameter, at, m) -> dict:
    return part(name, "cyl", (diameter, diameter, depth), at, m["metal"], rot=ROT_X90)


# -- furniture ----------------------------------------------------------------------------


def table(d, m):
    w, dp, h = d
    t = min(max(0.05 * h, 0.02), 0.05)
    s = min(max(0.06 * min(w, dp), 0.03), 0.08)
    x = w / 2 - s / 2 - 0.02 * w
    y = dp / 2 - s / 2 - 0.02 * dp
    return [
        part("top", "box", (w, dp, t), (0, 0, h - t / 2), m["wood"], bevel_width=min(0.005, t / 4)),
        part("leg_front", "box", (s, s, h - t), (x, -y, (h - t) / 2), m["wood"], role="leg", symmetry_tag="mirror_x"),
        part("leg_back", "box", (s, s, h - t), (x, y, (h - t) / 2), m["wood"], role="leg", symmetry_tag="mirror_x"),
    ]


def chair(d, m):
    w, dp, h = d
    st = 0.04
    sh = 0.5 * h
    s = min(0.05, 0.1 * w)
    bt = 0.04
    x = w / 2 - s / 2
    y = dp / 2 - s / 2
    return [
        part("seat", "box", (w, dp, st), (0, 0, sh - st / 2), m["wood"], bevel_width=0.004),
        part("leg_front", "box", (s, s, sh - st), (x, -y, (sh - st) / 2), m["wood"], role="leg", symmetry_tag="mirror_x"),
        part("leg_back", "box", (s, s, sh - st), (x, y, (sh - st) / 2), m["wood"], role="leg", symmetry_tag="mirror_x"),
        part("backrest", "box", (w, bt, h - sh), (0, dp / 2 - bt / 2, sh + (h - sh) / 2), m["wood"]),
    ]


def stool(d, m):
    w, dp, h = d
    st = 0.04
    r = 0.32 * min(w, dp)
    return [
        part("seat", "cyl", (w, dp, st), (0, 0, h - st / 2), m["wood"]),
        part("leg", "cyl", (0.03, 0.03, h - st), (r, 0, (h - st) / 2), m["metal"], symmetry_tag={"radial": {"count": 3, "pivot": [0, 0, 0]}}),
    ]


def bench(d, m):
    w, dp, h = d
    st = 0.05
    lt = 0.05
    return [
        part("seat", "box", (w, dp, st), (0, 0, h - st / 2), m["wood"], bevel_width=0.005),
        part("leg", "box", (lt, 0.9 * dp, h - st), (w / 2 - lt / 2 - 0.05 * w, 0, (h - st) / 2), m["wood"], symmetry_tag="mirror_x"),
    ]


def armchair(d, m):
    w, dp, h = d
    a = 0.15 * w
    bt = 0.18 * dp
    sh = 0.42 * h
    ah = 0.62 * h
    return [
        part("seat", "box", (w - 2 * a, dp - bt, sh), (0, -bt / 2, sh / 2), m["fabric"], bevel_width=0.01),
        part("backrest", "box", (w, bt, h), (0, dp / 2 - bt / 2, h / 2), m["fabric"], bevel_width=0.01),
        part("armrest", "box", (a, dp - bt, ah), (w / 2 - a / 2, -bt / 2, ah / 2), m["fabric"], symmetry_tag="mirror_x"),
    ]


def sofa(d, m):
    w, dp, h = d
    a = 0.1 * w
    bt = 0.2 * dp
    bh = 0.25 * h
    ch = 0.15 * h
    inner = w - 2 * a
    return [
        part("base", "box", (inner, dp - bt, bh), (0, -bt / 2, bh / 2), m["dark_wood"]),
        part("seat", "box", (inner / 2, dp - bt, ch), (inner / 4, -bt / 2, bh + ch / 2), m["fabric"], bevel_width=0.015, symmetry_tag="mirror_x"),
        part("backrest", "box", (w, bt, h), (0, dp / 2 - bt / 2, h / 2), m["fabric"], bevel_width=0.015),
        part("armrest", "box", (a, dp - bt, 0.6 * h), (w / 2 - a / 2, -bt / 2, 0.3 * h), m["fabric"], symmetry_tag="mirror_x"),
    ]


def bed(d, m):
    w, dp, h = d
    hb = 0.06
    fh = 0.3 * h
    mh = 0.25 * h
    ph = 0.1 * h
    body = dp - hb
    return [
        part("frame", "box", (w, body, fh), (0, -hb / 2, fh / 2), m["dark_wood"]),
        part("mattress", "box", (w - 0.04, body - 0.04, mh), (0, -hb / 2, fh + mh / 2), m["fabric"], bevel_width=0.02),
        part("headboard", "box", (w, hb, h), (0, dp / 2 - hb / 2, h / 2), m["dark_wood"]),
        part("pillow", "box", (0.35 * w, 0.35, ph), (0.22 * w, dp / 2 - hb - 0.2, fh + mh + ph / 2), m["fabric"], bevel_width=0.02, symmetry_tag="mirror_x"),
    ]


def shelf(d, m):
    w, dp, h = d
    t = 0.02
    n = max(3, min(7, int(round(h / 0.35)) + 1))
    parts = [part("side_panel", "box", (t, dp, h), (w / 2 - t / 2, 0, h / 2), m["wood"], symmetry_tag="mirror_x")]
    for k in range(n):
        z = t / 2 + k * (h - t) / (n - 1)
        parts.append(part(f"board_{k + 1}", "box", (w - 2 * t, dp, t), (0, 0, z), m["wood"], role="board"))
    return parts


def tv_stand(d, m):
    w, dp, h = d
    t = 0.025
    return [
        part("top", "box", (w, dp, t), (0, 0, h - t / 2), m["wood"]),
        part("side", "box", (t, dp, h - t), (w / 2 - t / 2, 0, (h - t) / 2), m["wood"], symmetry_tag="mirror_x"),
        part("bottom", "box", (w - 2 * t, dp, t), (0, 0, 0.05 + t / 2), m["wood"]),
        part("divider", "box", (t, dp, h - 0.05 - 2 * t), (0, 0, (h + 0.05) / 2), m["wood"]),
    ]


def _carcass(w, dp, h, front, t, m, back=True):
    """Top, mirrored side, bottom and back of a box body spanning y from ``front`` to dp/2."""
    cd = dp / 2 - front
    cy = (front + dp / 2) / 2
    out = [
        part("top", "box", (w, cd, t), (0, cy, h - t / 2), m["wood"]),
        part("side", "box", (t, cd, h - t), (w / 2 - t / 2, cy, (h - t) / 2), m["wood"], symmetry_tag="mirror_x"),
        part("bottom", "box", (w - 2 * t, cd, t), (0, cy, t / 2), m["wood"]),
    ]
    if back:
        out.append(part("back", "box", (w - 2 * t, t, h - 2 * t), (0, dp / 2 - t / 2, h / 2), m["wood"]))
    return out


def _drawer(name, w, t, front, back_y, z_lo, z_hi, m, k=0.03):
    """Open-top drawer box sliding out of the front, with a knob sub-part."""
    c = 0.002
    dd = back_y - front
    dh = z_hi - z_lo
    return part(
        name,
        "box",
        (w - 2 * t - 2 * c, dd, dh),
        (0, front + dd / 2, (z_lo + z_hi) / 2),
        m["wood"],
        role="drawer",
        shell_thickness=0.012,
        movable=True,
        must_be_independent=True,
        joint_hint="sliding",
        sub_parts=[knob("knob", k, 0.03, (0, -dd / 2 - k / 2, 0), m)],
    )


def nightstand(d, m, drawers=1):
    w, dp, h = d
    t = 0.02
    k = 0.03
    front = -dp / 2 + k
    parts = _carcass(w, dp, h, front, t, m)
    top_z = h - t - 0.005
    bottom_z = t + 0.005 if drawers > 1 else h - t - 0.005 - 0.35 * h
    step = (top_z - bottom_z) / drawers
    for i in range(drawers):
        hi = top_z - i * step
        name = "drawer" if drawers == 1 else f"drawer_{i + 1}"
        parts.append(_drawer(name, w, t, front, dp / 2 - t, hi - step + 0.004, hi, m, k))
    return parts


def dresser(d, m):
    return nightstand(d, m, drawers=3)


def _door(name, w_door, t_d, x, front, z_lo, z_hi, m, knob_dx, k):
    hd = z_hi - z_lo
    return part(
        name,
        "box",
        (w_door, t_d, hd),
        (x, front - t_d / 2, (z_lo + z_hi) / 2),
        m["dark_wood"],
        role="door",
        movable=True,
        must_be_independent=True,
        joint_hint="hinged",
        sub_parts=[knob("knob", k, 0.025, (knob_dx, -t_d / 2 - k / 2, 0.15 * hd), m)],
    )


def cabinet(d, m, drawer=True):
    w, dp, h = d
    t = 0.02
    t_d = 0.02
    k = 0.025
    front = -dp / 2 + t_d + k
    parts = _carcass(w, dp, h, front, t, m)
    door_top = h - 0.01
    if drawer:
        dh = 0.18 * h
        door_top = h - t - dh - 0.01
        parts.append(_drawer("drawer", w, t, front, dp / 2 - t, h - t - dh, h - t - 0.003, m, k))
    half = w / 2 - 0.002
    parts.append(_door("door_left", half, t_d, -w / 4 - 0.0005, front, 0.01, door_top, m, w / 4 - 0.04, k))
    parts.append(_door("door_right", half, t_d, w / 4 + 0.0005, front, 0.01, door_top, m, -(w / 4 - 0.04), k))
    return parts


def wardrobe(d, m):
    return cabinet(d, m, drawer=False)


def appliance(d, m, door_frac=0.95, hinge="right", round_door=False):
    """Box body with one hinged front door and a handle."""
    w, dp, h = d
    t_d = 0.03
    k = 0.03
    front = -dp / 2 + t_d + k
    body_d = dp / 2 - front
    parts = [part("body", "box", (w, body_d, h), (0, (front + dp / 2) / 2, h / 2), m["plastic"], bevel_width=0.004)]
    dw = door_frac * w
    x = (w - dw) / 2 if hinge == "right" else -(w - dw) / 2
    handle_dx = -(dw / 2 - 0.04) if hinge == "right" else dw / 2 - 0.04
    dh = 0.9 * h
    if round_door:
        dia = min(dw, dh)
        door = part("door", "cyl", (dia, dia, t_d), (x, front - t_d / 2, h / 2), m["glass"], rot=ROT_X90)
        handle = part("handle", "box", (0.03, 0.03, k), (handle_dx * dia / dw, 0, t_d / 2 + k / 2), m["metal"])
    else:
        door = part("door", "box", (dw, t_d, dh), (x, front - t_d / 2, h / 2), m["plastic"])
        handle = part("handle", "box", (0.03, k, 0.3 * dh), (handle_dx, -t_d / 2 - k / 2, 0), m["metal"])
    door.update(movable=True, must_be_independent=True, joint_hint="hinged", sub_parts=[handle])
    parts.append(door)
    return parts


def refrigerator(d, m):
    return appliance(d, m, 1.0, "right")


def microwave(d, m):
    return appliance(d, m, 0.7, "left")


def washing_machine(d, m):
    return appliance(d, m, 0.7, "left", round_door=True)


def storage_box(d, m):
    w, dp, h = d
    lt = 0.02
    return [
        part("body", "box", (w, dp, h - lt), (0, 0, (h - lt) / 2), m["plastic"], shell_thickness=0.006),
        part("lid", "box", (w, dp, lt), (0, 0, h - lt / 2), m["plastic"], movable=True, must_be_independent=True, joint_hint="hinged"),
    ]


def toilet(d, m):
    w, dp, h = d
    tank_d = 0.2 * dp
    bowl_d = dp - tank_d
    bh = 0.5 * h
    lt = 0.03
    return [
        part("bowl", "cyl", (0.95 * w, bowl_d, bh - lt), (0, -tank_d / 2, (bh - lt) / 2), m["ceramic"]),
        part("tank", "box", (w, tank_d, h), (0, dp / 2 - tank_d / 2, h / 2), m["ceramic"], bevel_width=0.005),
        part("lid", "box", (0.9 * w, bowl_d, lt), (0, -tank_d / 2, bh - lt / 2), m["ceramic"], movable=True, must_be_independent=True, joint_hint="hinged"),
    ]


def laptop(d, m):
    w, dp, h = d
    return [
        part("base", "box", (w, dp, h / 2), (0, 0, h / 4), m["metal"]),
        part("screen", "box", (w, dp, h / 2), (0, 0, 3 * h / 4), m["screen"], movable=True, must_be_independent=True, joint_hint="hinged"),
    ]


# -- wall items and covers -----------------------------------------------------------------


def rug(d, m):
    w, dp, h = d
    return [part("body", "box", (w, dp, h), (0, 0, h / 2), m["fabric"], bevel_width=min(0.004, h / 3))]


def poster(d, m):
    w, dp, h = d
    return [part("canvas", "box", (w, dp, h), (0, 0, h / 2), m["paper"])]


def mirror(d, m):
    w, dp, h = d
    fw = 0.06 * min(w, h)
    return [
        part("frame", "box", (w, 0.6 * dp, h), (0, 0.2 * dp, h / 2), m["dark_wood"], bevel_width=0.004),
        part("glass", "box", (w - 2 * fw, 0.4 * dp, h - 2 * fw), (0, -0.3 * dp, h / 2), m["glass"]),
    ]


def wall_clock(d, m):
    w, dp, h = d
    dia = min(w, h)
    return [
        part("rim", "torus", (dia, dia, dp), (0, 0, h / 2), m["metal"], rot=ROT_X90),
        part("face", "cyl", (dia - dp, dia - dp, 0.6 * dp), (0, 0, h / 2), m["paper"], rot=ROT_X90),
    ]


# -- small objects ---------------------------------------------------------------------------


def bowl(d, m):
    w, dp, h = d
    return [part("body", "sph", (w, dp, h), (0, 0, h / 2), m["ceramic"], shell_thickness=0.004)]


def plate(d, m):
    w, dp, h = d
    tube = 0.6 * h
    return [
        part("body", "cyl", (0.9 * w, 0.9 * dp, 0.5 * h), (0, 0, 0.25 * h), m["ceramic"]),
        part("rim", "torus", (w, dp, tube), (0, 0, h - tube / 2), m["ceramic"]),
    ]


def cup(d, m):
    w, dp, h = d
    return [part("body", "cyl", (w, dp, h), (0, 0, h / 2), m["ceramic"], shell_thickness=0.003)]


def mug(d, m):
    w, dp, h = d
    r = 0.006
    reach = 0.25 * w
    body = w - reach
    bx = -reach / 2
    arc = reach - r
    pts = [(arc * math.sin(math.pi * k / 4), 0.0, 0.3 * h * math.cos(math.pi * k / 4)) for k in range(5)]
    return [
        part("body", "cyl", (body, min(body, dp), h), (bx, 0, h / 2), m["ceramic"], shell_thickness=0.004),
        part("handle", "curve", (0, 0, 0), (bx + body / 2, 0, h / 2), m["ceramic"], curve={"points": [list(p) for p in pts], "radius": r, "closed": False}),
    ]


def vase(d, m):
    w, dp, h = d
    return [
        part("body", "sph", (w, dp, 0.7 * h), (0, 0, 0.35 * h), m["ceramic"]),
        part("neck", "cyl", (0.4 * w, 0.4 * dp, 0.4 * h), (0, 0, 0.8 * h), m["ceramic"], shell_thickness=0.003),
    ]


def bottle(d, m):
    w, dp, h = d
    return [
        part("body", "cyl", (w, dp, 0.7 * h), (0, 0, 0.35 * h), m["glass"]),
        part("neck", "cyl", (0.35 * w, 0.35 * dp, 0.3 * h), (0, 0, 0.85 * h), m["glass"]),
    ]


def book(d, m):
    w, dp, h = d
    return [part("body", "box", (w, dp, h), (0, 0, h / 2), m["paper"], bevel_width=min(0.002, min(d) / 4))]


def utensil(d, m):
    w, dp, h = d
    return [part("body", "box", (w, dp, h), (0, 0, h / 2), m["metal"])]


def spoon(d, m):
    w, dp, h = d
    scoop = 0.3 * dp
    return [
        part("body", "box", (0.3 * w, dp - scoop, 0.5 * h), (0, scoop / 2, 0.25 * h), m["metal"]),
        part("scoop", "sph", (w, scoop, h), (0, -dp / 2 + scoop / 2, h / 2), m["metal"]),
    ]


def teapot(d, m):
    w, dp, h = d
    bw = 0.6 * w
    tube = 0.08 * h
    spout_len = 0.3 * w
    c = math.cos(math.radians(45))
    spout_rot = [0.0, math.sin(math.radians(-22.5)), 0.0, math.cos(math.radians(-22.5))]
    return [
        part("body", "sph", (bw, dp, 0.85 * h), (0, 0, 0.425 * h), m["ceramic"]),
        part("handle", "torus", (0.4 * h, 0.4 * h, tube), (bw / 2, 0, 0.45 * h), m["ceramic"], rot=ROT_X90),
        part("spout", "cyl", (0.06 * w, 0.06 * w, spout_len), (-bw / 2 - spout_len * c / 2 + 0.02 * w, 0, 0.45 * h), m["ceramic"], rot=spout_rot),
        part("knob", "sph", (0.1 * w, 0.1 * w, 0.2 * h), (0, 0, 0.9 * h), m["ceramic"]),
    ]


def lamp(d, m):
    w, dp, h = d
    return [
        part("base", "cyl", (0.6 * w, 0.6 * dp, 0.04 * h), (0, 0, 0.02 * h), m["metal"]),
        part("pole", "cyl", (0.02 + 0.02 * w, 0.02 + 0.02 * w, 0.7 * h), (0, 0, 0.04 * h + 0.35 * h), m["metal"]),
        part("shade", "cyl", (w, dp, 0.35 * h), (0, 0, 0.825 * h), m["fabric"], shell_thickness=0.004),
    ]


def ceiling_lamp(d, m):
    w, dp, h = d
    sh = 0.35 * h
    return [
        part("canopy", "cyl", (0.3 * w, 0.3 * dp, 0.05 * h), (0, 0, 0.975 * h), m["metal"]),
        part("cord", "cyl", (0.01, 0.01, 0.6 * h), (0, 0, sh + 0.3 * h), m["plastic"]),
        part("shade", "sph", (w, dp, sh), (0, 0, sh / 2), m["glass"], rot=ROT_X180, shell_thickness=0.004),
    ]


def potted_plant(d, m, leaves=6):
    w, dp, h = d
    ph = 0.3 * h
    length = 0.5 * min(w, dp) / math.cos(math.radians(15))
    c = length / 2
    a = math.radians(15)
    return [
        part("pot", "cyl", (0.5 * w, 0.5 * dp, ph), (0, 0, ph / 2), m["ceramic"], shell_thickness=0.006),
        part("stem", "cyl", (0.03, 0.03, 0.55 * h), (0, 0, 0.05 * h + 0.275 * h), m["leaf"]),
        part(
            "leaf",
            "sph",
            (length, 0.15 * length, 0.04 * h),
            (c * math.cos(a), c * math.sin(a), 0.6 * h),
            m["leaf"],
            rot=_yaw_quat(15),
            symmetry_tag={"radial": {"count": leaves, "pivot": [0, 0, 0]}},
        ),
        part("crown", "sph", (0.2 * w, 0.2 * dp, 0.4 * h), (0, 0, 0.8 * h), m["leaf"]),
    ]


def monitor(d, m, base=True):
    w, dp, h = d
    sd = 0.03
    sh = 0.75 * h
    out = [
        part("screen", "box", (w, sd, sh), (0, -dp / 2 + sd / 2 + 0.04 * dp, h - sh / 2), m["screen"], bevel_width=0.003),
        part("stand", "box", (0.06 * w, 0.03, h - 0.02 - 0.5 * sh), (0, -dp / 2 + sd + 0.04 * dp + 0.015, 0.02 + (h - 0.02 - 0.5 * sh) / 2), m["metal"]),
    ]
    if base:
        out.append(part("base", "box", (0.4 * w, dp, 0.02), (0, 0, 0.01), m["metal"]))
    else:
        out[1]["dims"][2] = h - 0.5 * sh
        out[1]["local_pose"]["translation"][2] = (h - 0.5 * sh) / 2
        out.append(part("foot", "box", (0.4 * w, dp, 0.02), (0, 0, 0.01), m["metal"]))
    return out


def television(d, m):
    return monitor(d, m, base=False)


def phone(d, m):
    w, dp, h = d
    return [
        part("housing", "box", (w, dp, 0.8 * h), (0, 0, 0.4 * h), m["plastic"], bevel_width=min(0.001, 0.2 * h)),
        part("screen", "box", (0.92 * w, 0.92 * dp, 0.2 * h), (0, 0, 0.9 * h), m["screen"]),
    ]


TEMPLATES = {
    "table": table,
    "desk": table,
    "coffee_table": table,
    "dining_table": table,
    "side_table": table,
    "chair": chair,
    "stool": stool,
    "bench": bench,
    "armchair": armchair,
    "sofa": sofa,
    "bed": bed,
    "shelf": shelf,
    "bookshelf": shelf,
    "tv_stand": tv_stand,
    "nightstand": nightstand,
    "dresser": dresser,
    "cabinet": cabinet,
    "wardrobe": wardrobe,
    "refrigerator": refrigerator,
    "freezer": refrigerator,
    "dishwasher": refrigerator,
    "oven": microwave,
    "microwave": microwave,
    "washing_machine": washing_machine,
    "storage_box": storage_box,
    "toilet": toilet,
    "laptop": laptop,
    "rug": rug,
    "carpet": rug,
    "mat": rug,
    "blanket": rug,
    "tablecloth": rug,
    "poster": poster,
    "painting": poster,
    "artwork": poster,
    "photo_frame": poster,
    "mirror": mirror,
    "wall_clock": wall_clock,
    "bowl": bowl,
    "plate": plate,
    "cup": cup,
    "mug": mug,
    "vase": vase,
    "bottle": bottle,
    "book": book,
    "knife": utensil,
    "fork": utensil,
    "spoon": spoon,
    "teapot": teapot,
    "lamp": lamp,
    "floor_lamp": lamp,
    "ceiling_lamp": ceiling_lamp,
    "potted_plant": potted_plant,
    "monitor": monitor,
    "television": television,
    "phone": phone,
}

# Typical sizes (w, d, h) in meters, used when a request or test needs a default.
DEFAULT_DIMS = {
    "table": (1.2, 0.8, 0.75),
    "desk": (1.2, 0.6, 0.75),
    "coffee_table": (1.0, 0.55, 0.45),
    "dining_table": (1.6, 0.9, 0.76),
    "side_table": (0.5, 0.5, 0.55),
    "chair": (0.45, 0.5, 0.9),
    "stool": (0.35, 0.35, 0.65),
    "bench": (1.2, 0.4, 0.45),
    "armchair": (0.8, 0.8, 0.85),
    "sofa": (2.0, 0.9, 0.85),
    "bed": (1.6, 2.1, 1.0),
    "shelf": (0.8, 0.3, 1.8),
    "bookshelf": (0.9, 0.32, 2.0),
    "tv_stand": (1.4, 0.4, 0.5),
    "nightstand": (0.5, 0.55, 0.6),
    "dresser": (1.0, 0.5, 0.9),
    "cabinet": (0.8, 0.45, 0.9),
    "wardrobe": (1.2, 0.6, 2.0),
    "refrigerator": (0.7, 0.7, 1.8),
    "freezer": (0.6, 0.65, 0.85),
    "dishwasher": (0.6, 0.6, 0.85),
    "oven": (0.6, 0.6, 0.6),
    "microwave": (0.5, 0.4, 0.3),
    "washing_machine": (0.6, 0.6, 0.85),
    "storage_box": (0.5, 0.35, 0.3),
    "toilet": (0.4, 0.7, 0.8),
    "laptop": (0.34, 0.24, 0.02),
    "rug": (2.0, 1.4, 0.01),
    "carpet": (3.0, 2.0, 0.012),
    "mat": (0.8, 0.5, 0.01),
    "blanket": (1.5, 1.2, 0.01),
    "tablecloth": (1.4, 0.9, 0.004),
    "poster": (0.6, 0.01, 0.9),
    "painting": (0.8, 0.04, 0.6),
    "artwork": (1.0, 0.03, 0.7),
    "photo_frame": (0.25, 0.02, 0.3),
    "mirror": (0.6, 0.04, 0.9),
    "wall_clock": (0.3, 0.05, 0.3),
    "bowl": (0.16, 0.16, 0.07),
    "plate": (0.26, 0.26, 0.025),
    "cup": (0.08, 0.08, 0.1),
    "mug": (0.12, 0.09, 0.1),
    "vase": (0.15, 0.15, 0.3),
    "bottle": (0.07, 0.07, 0.28),
    "book": (0.16, 0.24, 0.03),
    "knife": (0.02, 0.22, 0.003),
    "fork": (0.025, 0.19, 0.004),
    "spoon": (0.04, 0.18, 0.012),
    "teapot": (0.25, 0.16, 0.18),
    "lamp": (0.3, 0.3, 0.55),
    "floor_lamp": (0.4, 0.4, 1.6),
    "ceiling_lamp": (0.4, 0.4, 0.5),
    "potted_plant": (0.4, 0.4, 0.8),
    "monitor": (0.6, 0.2, 0.45),
    "television": (1.2, 0.25, 0.75),
    "phone": (0.07, 0.15, 0.008),
}


def template_plan(category: str, dims, seed: int = 0, style: str = "", ont: CategoryOntology | None = None) -> ObjectPlan:
    """Instantiate the template for ``category`` at ``dims``; categories
    without a template get a single body box and rely on plan completion."""
    ont = ont or default_ontology()
    name = ont.resolve_name(category) or category
    d = tuple(float(v) for v in dims)
    palette = PALETTES[seed % len(PALETTES)]
    fn = TEMPLATES.get(name)
    if fn is None:
        entry = ont.lookup(name)
        role = entry.required_parts[0] if entry and entry.required_parts else "body"
        parts = [part(role, "box", d, (0, 0, d[2] / 2), palette["plastic"])]
    else:
        parts = fn(d, palette)
    return ObjectPlan.from_dict(
        {"category": name, "target_dims": list(d), "style": style, "provenance": Provenance.TEMPLATE.value, "parts": parts}
    )


class TemplateBackend(PlannerBackend):
    """Plans from the template library; repairs by clamping parameters."""

    capabilities = Capabilities(can_propose=True, can_repair=True, can_revise=True, can_critique=False, deterministic=True)
    name = "template"

    def __init__(self, seed: int = 0, ont: CategoryOntology | None = None):
        self.seed = int(seed)
        self.ont = ont or default_ontology()

    def propose_plan(self, req, strategy):
        return template_plan(req.category, req.target_dims, self.seed, req.style, self.ont)

    def repair_program(self, program: PartProgram, error) -> PartProgram:
        ops = list(program.ops)
        i = error.op_index
        if not 0 <= i < len(ops):
            raise Unsupported(f"no op {i} in program {program.part_name}")
        op = ops[i]
        if isinstance(op, Bevel):
            ops[i] = replace(op, width=op.width / 2)
        elif isinstance(op, Solidify):
            ops[i] = replace(op, thickness=op.thickness / 2)
        elif isinstance(op, CreatePrimitive):
            ops[i] = replace(op, params=_clamp_params(op.params), segments=None)
        else:
            raise Unsupported(f"cannot repair {op.tag} in {program.part_name}")
        return with_ops(program, ops)

    def revise_plan(self, plan: ObjectPlan, reasons):
        """Uniformly rescale so the largest relative overshoot or shortfall is removed."""
        ext = plan_union_aabb(plan).extents
        d = np.asarray(plan.target_dims)
        ratios = d / np.maximum(ext, 1e-9)
        s = float(ratios[np.argmax(np.abs(np.log(ratios)))])
        if abs(s - 1.0) < 1e-9:
            raise Unsupported("plan already matches its target size; nothing to revise")
        return replace(plan, parts=tuple(scale_part_tree(p, s) for p in plan.parts))


def _clamp_params(params: dict) -> dict:
    out = dict(params)
    for key in ("radius", "radius_y", "height", "major", "minor"):
        if key in out and out[key] is not None:
            out[key] = max(float(out[key]), 0.001)
    for key in ("size", "radii"):
        if key in out and isinstance(out[key], (list, tuple)):
            out[key] = [max(float(v), 0.001) for v in out[key]]
    if out.get("major") is not None and out.get("minor") is not None and out["minor"] >= out["major"]:
        out["minor"] = out["major"] / 2
    return out

