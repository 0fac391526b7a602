"""Fixed style and material vocabularies the stylist stage must draw from.

Matching is case-insensitive; canonical casing is what these tuples carry.
The material list is stored deduplicated (16 unique entries).
"""

from __future__ import annotations

STYLE_BANK: tuple[str, ...] = (
    "Contemporary", "Coastal", "Scandinavian", "Shabby Chic", "Transitional",
    "Modern", "Mid-century", "Retro", "Minimalist", "Traditional",
    "Farmhouse", "Antique", "Industrial", "Rustic", "Vintage",
    "Mission", "French", "Art Deco", "Victorian", "Chippendale",
    "Country", "Craftsman", "Shaker", "Queen Anne", "Hepplewhite",
    "Louis XVI", "Asian", "Jacobean", "Colonial", "Federal", "Sheraton",
)

MATERIAL_BANK: tuple[str, ...] = (
    "wood", "plywood", "marble", "paper", "fibre", "plastic", "glass",
    "textile", "iron", "steel", "gold", "silver", "bronze", "cotton",
    "linen", "leather",
)

_STYLE_LOOKUP = {s.lower(): s for s in STYLE_BANK}
_MATERIAL_LOOKUP = {m.lower(): m for m in MATERIAL_BANK}


def canonical_style(name: str) -> str | None:
    """Bank entry matching ``name`` case-insensitively, or None."""
    return _STYLE_LOOKUP.get(name.strip().lower())


def canonical_material(name: str) -> str | None:
    return _MATERIAL_LOOKUP.get(name.strip().lower())
