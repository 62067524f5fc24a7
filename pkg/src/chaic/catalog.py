"""Built-in object catalog: names, categories, kinds, and default attributes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    category: str
    kind: str
    weight: float
    fragile: bool


# Categories eligible as indoor goal categories. Decor is excluded so that
# fragile vases only enter target sets through the high-target extra slot.
INDOOR_TARGET_CATEGORIES = ("fruit", "baked", "drink", "snack", "stationery", "toy", "kitchenware")

# Shopping vocabulary: the three shop categories and their item names.
SHOPPING_CATEGORIES = {
    "fruit": ("apple", "orange", "grape", "banana"),
    "baked": ("loaf_bread", "croissant", "burger", "donut"),
    "drink": ("cola", "pepsi", "sprite", "fanta"),
}


@lru_cache(maxsize=1)
def load_catalog() -> dict[str, CatalogEntry]:
    raw = json.loads(resources.files("chaic.data").joinpath("catalog.json").read_text())
    out = {}
    for e in raw["entries"]:
        out[e["name"]] = CatalogEntry(
            name=e["name"],
            category=e["category"],
            kind=e["kind"],
            weight=e["weight"],
            fragile=e["fragile"],
        )
    return out


def entries_of_kind(kind: str) -> list[CatalogEntry]:
    return [e for e in load_catalog().values() if e.kind == kind]


def names_in_category(category: str) -> list[str]:
    return sorted(e.name for e in load_catalog().values() if e.category == category)


def category_of(name: str) -> str:
    return load_catalog()[name].category
