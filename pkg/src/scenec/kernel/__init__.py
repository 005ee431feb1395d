"""Deterministic mesh construction: primitives, modifiers, UVs and OBJ I/O."""

from scenec.kernel.mesh import (
    DEFAULT_MATERIAL,
    MaterialSpec,
    TriMesh,
    concat_meshes,
    euler_characteristic,
    is_closed,
    nonmanifold_edge_count,
    signed_volume,
    surface_area,
)
from scenec.kernel.modifiers import (
    bevel_edges,
    duplicate_part,
    generate_uv,
    mirror_about,
    radial_array,
    solidify,
)
from scenec.kernel.primitives import PrimitiveKind, make_primitive

__all__ = [
    "DEFAULT_MATERIAL",
    "MaterialSpec",
    "PrimitiveKind",
    "TriMesh",
    "bevel_edges",
    "concat_meshes",
    "duplicate_part",
    "euler_characteristic",
    "generate_uv",
    "is_closed",
    "make_primitive",
    "mirror_about",
    "nonmanifold_edge_count",
    "radial_array",
    "signed_volume",
    "solidify",
    "surface_area",
]
