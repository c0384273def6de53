"""Shared domain types and elementary vector/prototype math.

Embedding vectors are 1-D float64 numpy arrays; all arithmetic is binary64
even though banks store binary32 (see mpa.bank).  Types are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimMismatchError, EmptyClassError
from .validation import as_vector, common_dim, nonzero_norm


class Modality(IntEnum):
    """Provenance tag of an embedding record; values match the bank wire codes."""

    VISUAL_RAW = 0
    VISUAL_NATURAL = 1    # crops, rotations, color jitter
    VISUAL_GEOMETRIC = 2  # horizontal reflection
    SEMANTIC = 3          # encoded text description variants
    UNCERTAIN = 4         # synthetic absorber-class samples


def _frozen_vector(values, dim: int | None = None) -> np.ndarray:
    v = as_vector(values, dim=dim)
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class LabeledEmbedding:
    """One labeled, modality-tagged vector; the unit the bank persists."""

    class_id: int
    item_id: int
    view_id: int
    modality: Modality
    vector: np.ndarray

    def __post_init__(self):
        if self.class_id < 0 or self.item_id < 0 or self.view_id < 0:
            raise ValueError("class_id, item_id and view_id must be non-negative")
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "vector", _frozen_vector(self.vector))

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.class_id, self.item_id, self.view_id, int(self.modality))


@dataclass(frozen=True)
class Prototype:
    """Single-vector summary of one class's support features."""

    class_id: int
    vector: np.ndarray

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError("class_id must be non-negative")
        object.__setattr__(self, "vector", _frozen_vector(self.vector))

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class EpisodeSpec:
    """Layout of one N-way K-shot task."""

    n_way: int = 5
    k_shot: int = 1
    q_queries: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.n_way < 2:
            raise ValueError("n_way must be at least 2")
        if self.k_shot < 1:
            raise ValueError("k_shot must be at least 1")
        if self.q_queries < 1:
            raise ValueError("q_queries must be at least 1")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 unsigned bits")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two nonzero vectors of equal dim."""
    va = as_vector(a, name="a")
    vb = as_vector(b, name="b")
    if va.shape[0] != vb.shape[0]:
        raise DimMismatchError(f"dims differ: {va.shape[0]} vs {vb.shape[0]}")
    na = nonzero_norm(va, name="a")
    nb = nonzero_norm(vb, name="b")
    # rounding can push the ratio an ulp past the mathematical range
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def mean_prototype(members: Sequence) -> np.ndarray:
    """Element-wise arithmetic mean of a nonempty list of same-dim vectors."""
    if len(members) == 0:
        raise EmptyClassError("cannot take the mean of an empty member list")
    vectors = [as_vector(m, name=f"members[{i}]") for i, m in enumerate(members)]
    common_dim(vectors, name="members")
    return np.mean(np.stack(vectors), axis=0)


def l2_normalize(v) -> np.ndarray:
    """Scale a nonzero vector to unit Euclidean norm."""
    vec = as_vector(v)
    return vec / nonzero_norm(vec)


def compute_prototypes(
    rows: Iterable[LabeledEmbedding], *, raw_only: bool = False
) -> list[Prototype]:
    """Per-class mean prototypes from enriched support rows.

    By default every non-uncertain modality contributes (raw, natural,
    geometric, semantic); ``raw_only`` restricts to VISUAL_RAW for ablating
    the enrichment's effect on prototypes.  Returned sorted by class_id.
    """
    members: dict[int, list[np.ndarray]] = {}
    for row in rows:
        if row.modality == Modality.UNCERTAIN:
            continue
        if raw_only and row.modality != Modality.VISUAL_RAW:
            continue
        members.setdefault(row.class_id, []).append(row.vector)
    if not members:
        raise EmptyClassError("no rows eligible for prototype computation")
    return [
        Prototype(class_id=cid, vector=mean_prototype(vecs))
        for cid, vecs in sorted(members.items())
    ]
