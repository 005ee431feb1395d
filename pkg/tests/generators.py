"""Random part programs covering every primitive the lowering emits and every modifier."""

from __future__ import annotations

import math

import numpy as np

from scenec.core import RigidTransform
from scenec.kernel.mesh import MaterialSpec
from scenec.program import (
    AssignMaterial,
    Bevel,
    CreatePrimitive,
    GenerateUv,
    MirrorAbout,
    PartProgram,
    RadialArray,
    Solidify,
    Transform,
)

# Kind built, whether it needs a solidify pass, whether bevel applies (convex closed solids).
KINDS = {
    "box": (False, True),
    "canvas": (False, True),
    "open_box": (True, False),
    "cyl": (False, True),
    "open_cyl": (True, False),
    "sph": (False, True),
    "hemishell": (True, False),
    "torus": (False, False),
    "curve": (False, False),
}


def _params(kind, rng):
    u = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
    if kind in ("box", "canvas", "open_box"):
        return {"size": [u(0.05, 1.0), u(0.05, 1.0), u(0.05, 1.0)]}, None
    if kind in ("cyl", "open_cyl"):
        r, ry = u(0.03, 0.5), u(0.03, 0.5)
        return {"radius": r, "radius_y": ry, "height": u(0.05, 1.0)}, int(rng.integers(8, 33))
    if kind in ("sph", "hemishell"):
        return {"radii": [u(0.05, 0.5), u(0.05, 0.5), u(0.05, 0.5)]}, [int(rng.integers(8, 25)), int(rng.integers(4, 13))]
    if kind == "torus":
        minor = u(0.01, 0.08)
        return {"major": minor + u(0.03, 0.4), "minor": minor}, [int(rng.integers(8, 25)), int(rng.integers(6, 13))]
    # A gently bent open polyline, well clear of self-contact.
    n = int(rng.integers(2, 6))
    length = u(0.2, 0.8)
    bend = u(-0.6, 0.6)
    pts, heading, p = [], 0.0, np.zeros(3)
    for _ in range(n):
        pts.append(p.tolist())
        p = p + length / n * np.array([math.cos(heading), 0.0, math.sin(heading)])
        heading += bend / n
    pts.append(p.tolist())
    return {"points": pts, "radius": u(0.005, 0.02), "closed": False}, int(rng.integers(6, 13))


def _min_extent(params):
    if "size" in params:
        return min(params["size"])
    if "radius" in params and "height" in params:
        return min(2 * params["radius"], 2 * params["radius_y"], params["height"])
    if "radii" in params:
        return 2 * min(params["radii"])
    return 0.0


def random_transform(rng) -> RigidTransform:
    q = rng.normal(size=4)
    return RigidTransform.from_quaternion(q, rng.uniform(-1.0, 1.0, size=3))


def random_program(rng, name="part") -> PartProgram:
    kind = str(rng.choice(sorted(KINDS)))
    needs_solidify, bevelable = KINDS[kind]
    params, segments = _params(kind, rng)
    ops = [CreatePrimitive(kind, params, segments)]
    if needs_solidify:
        ops.append(Solidify(float(rng.uniform(0.002, 0.1 * _min_extent(params)))))
    elif bevelable and rng.random() < 0.5:
        # Below half the shortest mesh edge for every tessellation used here.
        ops.append(Bevel(float(rng.uniform(0.0005, 0.002)), int(rng.integers(1, 3))))
    ops.append(Transform(random_transform(rng)))
    roll = rng.random()
    if roll < 0.3:
        n = rng.normal(size=3)
        ops.append(MirrorAbout(tuple(rng.uniform(-0.5, 0.5, 3).tolist()), tuple((n / np.linalg.norm(n)).tolist())))
    elif roll < 0.6:
        a = rng.normal(size=3)
        ops.append(RadialArray(tuple(rng.uniform(-0.5, 0.5, 3).tolist()), tuple((a / np.linalg.norm(a)).tolist()), int(rng.integers(2, 9))))
    channels = {}
    if rng.random() < 0.5:
        channels["roughness"] = float(rng.random())
    if rng.random() < 0.5:
        channels["metallic"] = float(rng.random())
    ops.append(AssignMaterial(MaterialSpec(f"mat{int(rng.integers(0, 4))}", **channels)))
    ops.append(GenerateUv(kind))
    return PartProgram(name, tuple(ops))


def buildable_program(rng, name="part"):
    """Draw programs until one executes; returns (program, meshes)."""
    from scenec.errors import ExecError
    from scenec.program import execute_program

    while True:
        prog = random_program(rng, name)
        try:
            return prog, execute_program(prog)
        except ExecError:
            continue
