"""Strategy routing over a category ontology."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from scenec.core import AssetRequest, SupportKind
from scenec.errors import InvalidValue, SchemaError, UnknownCategory

log = logging.getLogger(__name__)

ONTOLOGY_VERSION = 1

ARTICULATION_KEYWORDS = frozenset({"door", "drawer", "lid", "hinge", "slide", "sliding", "slider", "rotating", "cap", "lever"})
# Roles whose presence means the object is structured rather than a single shape.
STRUCTURAL_ROLES = ("handle", "shell", "housing")
SIDES = ("front", "back", "left", "right")


class Strategy(str, Enum):
    WALL_ART = "WallArt"
    STATIC_FURN = "StaticFurn"
    SIMPLE_MANIP = "SimpleManip"
    STRUCT_MANIP = "StructManip"
    ARTIC = "Artic"
    THIN_COVER = "ThinCover"

    @property
    def is_rigid(self) -> bool:
        return self is not Strategy.ARTIC


@dataclass(frozen=True)
class PartDefault:
    """Template for inserting a missing part: primitive plus dims and center
    as fractions of the object's target dims (center z measured from the floor)."""

    primitive: str
    rel_dims: tuple
    rel_pos: tuple

    def to_dict(self) -> dict:
        return {"primitive": self.primitive, "rel_dims": list(self.rel_dims), "rel_pos": list(self.rel_pos)}


@dataclass(frozen=True)
class CategoryEntry:
    family: Strategy
    required_parts: tuple = ()
    movable_roles: tuple = ()
    functional_sides: tuple = ()
    furniture_scale: bool = False
    print_like: bool = False
    thin_cover: bool = False
    articulation_keywords: tuple = ()
    repeatable_roles: tuple = ()
    part_defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.required_parts)) != len(self.required_parts):
            raise InvalidValue(f"required_parts must be unique: {self.required_parts}")
        for side in self.functional_sides:
            if side not in SIDES:
                raise InvalidValue(f"unknown functional side {side!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "CategoryEntry":
        if not data.get("family"):
            raise SchemaError("ontology entry needs a family hint")
        defaults = {
            role: PartDefault(d["primitive"], tuple(d["rel_dims"]), tuple(d["rel_pos"]))
            for role, d in data.get("part_defaults", {}).items()
        }
        return cls(
            family=Strategy(data["family"]),
            required_parts=tuple(data.get("required_parts", ())),
            movable_roles=tuple(data.get("movable_roles", ())),
            functional_sides=tuple(data.get("functional_sides", ())),
            furniture_scale=bool(data.get("furniture_scale", False)),
            print_like=bool(data.get("print_like", False)),
            thin_cover=bool(data.get("thin_cover", False)),
            articulation_keywords=tuple(data.get("articulation_keywords", ())),
            repeatable_roles=tuple(data.get("repeatable_roles", ())),
            part_defaults=defaults,
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "required_parts": list(self.required_parts),
            "movable_roles": list(self.movable_roles),
            "functional_sides": list(self.functional_sides),
            "furniture_scale": self.furniture_scale,
            "print_like": self.print_like,
            "thin_cover": self.thin_cover,
            "articulation_keywords": list(self.articulation_keywords),
            "repeatable_roles": list(self.repeatable_roles),
            "part_defaults": {k: v.to_dict() for k, v in sorted(self.part_defaults.items())},
        }


def normalize_category(name: str) -> str:
    key = re.sub(r"[\s\-]+", "_", name.strip().lower())
    return key


def _singular(key: str) -> str:
    if key.endswith("ies") and len(key) > 4:
        return key[:-3] + "y"
    if key.endswith(("ches", "shes", "sses", "xes")):
        return key[:-2]
    if key.endswith("s") and not key.endswith("ss") and len(key) > 3:
        return key[:-1]
    return key


@dataclass(frozen=True)
class CategoryOntology:
    entries: dict
    version: int = ONTOLOGY_VERSION
    aliases: dict = field(default_factory=dict)

    def lookup(self, category: str) -> CategoryEntry | None:
        key = normalize_category(category)
        for cand in (key, _singular(key)):
            cand = self.aliases.get(cand, cand)
            if cand in self.entries:
                return self.entries[cand]
        return None

    def resolve_name(self, category: str) -> str | None:
        key = normalize_category(category)
        for cand in (key, _singular(key)):
            cand = self.aliases.get(cand, cand)
            if cand in self.entries:
                return cand
        return None

    def __contains__(self, category: str) -> bool:
        return self.lookup(category) is not None

    def categories(self) -> list[str]:
        return sorted(self.entries)

    def merged(self, other: "CategoryOntology") -> "CategoryOntology":
        return CategoryOntology({**self.entries, **other.entries}, max(self.version, other.version), {**self.aliases, **other.aliases})

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "aliases": dict(sorted(self.aliases.items())),
            "categories": {k: self.entries[k].to_dict() for k in sorted(self.entries)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CategoryOntology":
        version = int(data.get("version", ONTOLOGY_VERSION))
        if version > ONTOLOGY_VERSION:
            raise SchemaError(f"ontology version {version} is newer than supported ({ONTOLOGY_VERSION})")
        entries = {normalize_category(k): CategoryEntry.from_dict(v) for k, v in data.get("categories", {}).items()}
        aliases = {normalize_category(k): normalize_category(v) for k, v in data.get("aliases", {}).items()}
        return cls(entries, version, aliases)


_DEFAULT: CategoryOntology | None = None


def default_ontology() -> CategoryOntology:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("scenec.data").joinpath("ontology.json").read_text(encoding="utf-8")
        _DEFAULT = CategoryOntology.from_dict(json.loads(text))
    return _DEFAULT


def load_ontology(path: str | Path | None = None) -> CategoryOntology:
    """Shipped ontology, with a user file (if given) merged over it."""
    base = default_ontology()
    if path is None:
        return base
    try:
        user = CategoryOntology.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return base.merged(user)


def _words(text: str) -> set[str]:
    words = set()
    for w in re.findall(r"[a-z]+", text.lower()):
        words.add(w)
        words.add(_singular(w))
    return words


def has_articulation_keyword(text: str, extra: tuple = ()) -> bool:
    return bool(_words(text) & (ARTICULATION_KEYWORDS | set(extra)))


def route(req: AssetRequest, ont: CategoryOntology, allow_default: bool = False) -> Strategy:
    """Pick the construction strategy for a request.

    Articulation (description keywords or movable roles) wins over every
    category family; then thin covers, wall-mounted prints, furniture, and
    finally manipulands split by expected part structure.
    """
    entry = ont.lookup(req.category)
    if entry is None:
        if has_articulation_keyword(f"{req.category} {req.description}"):
            return Strategy.ARTIC
        if allow_default:
            log.warning("unknown category %r routed to StaticFurn by request", req.category)
            return Strategy.STATIC_FURN
        raise UnknownCategory(f"category {req.category!r} is not in the ontology")
    if entry.movable_roles or has_articulation_keyword(req.description, entry.articulation_keywords):
        if not entry.movable_roles:
            log.warning("description of %s asks for moving parts; category has none", req.id)
        return Strategy.ARTIC
    if entry.thin_cover:
        return Strategy.THIN_COVER
    if entry.print_like and req.support.kind is SupportKind.WALL:
        return Strategy.WALL_ART
    if entry.furniture_scale:
        return Strategy.STATIC_FURN
    if entry.family in (Strategy.WALL_ART, Strategy.THIN_COVER, Strategy.STATIC_FURN):
        return entry.family
    structural = any(any(s in role for s in STRUCTURAL_ROLES) for role in entry.required_parts)
    if len(entry.required_parts) <= 2 and not structural:
        return Strategy.SIMPLE_MANIP
    return Strategy.STRUCT_MANIP
