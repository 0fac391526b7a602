"""Bind styled assets to catalog entries by text similarity.

Queries are "{style} {material} {name}" strings.  When both a precomputed
query embedding and entry embeddings exist the score is cosine similarity,
otherwise token overlap between the query and the entry name+tags.  One
entry is sampled uniformly from the top-k with a seeded generator.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RetrievalError


@dataclass
class CatalogEntry:
    id: str
    name: str
    tags: tuple[str, ...]
    dims_cm: tuple[float, float, float]
    embedding: np.ndarray | None = None
    mesh_ref: str | None = None

    def __post_init__(self):
        if min(self.dims_cm) <= 0:
            raise ValueError(f"catalog entry '{self.id}' has non-positive dims")
        if self.embedding is not None:
            v = np.asarray(self.embedding, dtype=float)
            norm = float(np.linalg.norm(v))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"embedding of '{self.id}' is not unit-norm ({norm})")
            self.embedding = v


@dataclass
class EmbeddingSidecar:
    """Precomputed vectors keyed by entry id and by known query strings."""

    entries: dict[str, np.ndarray]
    queries: dict[str, np.ndarray]

    def query_vector(self, query: str) -> np.ndarray | None:
        return self.queries.get(query)


def load_catalog(path: str | Path) -> list[CatalogEntry]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise RetrievalError("catalog file must hold a JSON array")
    entries = []
    for obj in data:
        entries.append(CatalogEntry(
            id=obj["id"], name=obj["name"],
            tags=tuple(obj.get("tags", [])),
            dims_cm=tuple(float(v) for v in obj["dims_cm"]),
            embedding=np.array(obj["embedding"], dtype=float) if obj.get("embedding") else None,
            mesh_ref=obj.get("mesh_ref"),
        ))
    return entries


def load_sidecar(path: str | Path) -> EmbeddingSidecar:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return EmbeddingSidecar(
        entries={k: np.array(v, dtype=float) for k, v in data.get("entries", {}).items()},
        queries={k: np.array(v, dtype=float) for k, v in data.get("queries", {}).items()},
    )


def build_query(style: str, material: str, name: str) -> str:
    return " ".join(part for part in (style, material, name) if part).strip()


def _tokens(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[a-z0-9]+", text.lower()))


def token_overlap_score(query: str, entry: CatalogEntry) -> float:
    q = _tokens(query)
    e = _tokens(entry.name + " " + " ".join(entry.tags))
    if not q or not e:
        return 0.0
    return len(q & e) / len(q | e)


def retrieve(query: str, catalog: list[CatalogEntry], k: int = 10, seed: int = 0,
             sidecar: EmbeddingSidecar | None = None) -> CatalogEntry:
    """Top-k by similarity (ties: entry id ascending), then one uniform
    seeded draw from that set."""
    if not catalog:
        raise RetrievalError("catalog is empty")
    qvec = sidecar.query_vector(query) if sidecar is not None else None

    scored = []
    for entry in catalog:
        evec = entry.embedding
        if evec is None and sidecar is not None:
            evec = sidecar.entries.get(entry.id)
        if qvec is not None and evec is not None:
            score = float(np.dot(qvec, evec))
        else:
            score = token_overlap_score(query, entry)
        scored.append((-score, entry.id, entry))
    # only actual matches compete for the top-k; an unmatched query falls
    # back to the whole catalog so retrieval stays total
    matches = [t for t in scored if t[0] < 0.0]
    pool = matches if matches else scored
    pool.sort(key=lambda t: (t[0], t[1]))
    top = pool[: max(1, k)]
    rng = random.Random(seed)
    return top[rng.randrange(len(top))][2]


def display_scale(entry: CatalogEntry, width_cm: float, depth_cm: float,
                  height_cm: float) -> tuple[float, float, float]:
    """Per-axis factors that scale the catalog mesh to the asset's bounding
    box; layout always keeps the selected dims, the mesh is display-only."""
    return (width_cm / entry.dims_cm[0], depth_cm / entry.dims_cm[1],
            height_cm / entry.dims_cm[2])
