"""Semantic variant generation, caching and text-feature incorporation.

Each class contributes M = 1 + n_variants text descriptions (the original
plus paraphrases).  Descriptions come from the provider's variants endpoint,
from a persistent cache keyed by (class_name, n_variants, llm_id), or from
the offline fallback template.  Every description becomes one support row
of modality SEMANTIC, dimension-fitted to the bank dim.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import EmptyClassNameError, ProviderUnavailable
from .model import LabeledEmbedding, Modality
from .validation import as_vector

PROMPT_TEMPLATE = (
    "Please generate an appearance description for {}, with four paraphrased variants."
)
FALLBACK_TEMPLATE = "a photo of a {}"

VARIANT_CACHE_ENV = "MPA_VARIANT_CACHE"


class VariantSource(Enum):
    LLM_PROVIDER = "llm-provider"
    CACHE_FILE = "cache-file"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class SemanticVariantSet:
    class_id: int
    class_name: str
    descriptions: tuple[str, ...]
    source: VariantSource

    def __post_init__(self):
        if not self.descriptions:
            raise ValueError("descriptions must be nonempty")
        for desc in self.descriptions:
            if not desc.strip():
                raise ValueError("descriptions must be nonempty texts")
        object.__setattr__(self, "descriptions", tuple(self.descriptions))


def build_prompt(class_name: str) -> str:
    """The fixed variant-generation prompt with the class name substituted."""
    name = (class_name or "").strip()
    if not name:
        raise EmptyClassNameError("class name must be nonempty")
    return PROMPT_TEMPLATE.format(name)


class VariantCache:
    """Persistent JSON store of generated descriptions.

    Hits return byte-identical descriptions across runs.  Reads are
    lock-free after load; writes are serialized through a single lock and
    rewrite the whole file (entries are small).
    """

    def __init__(self, path=None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, int, str], list[str]] = {}
        if self._path is not None and self._path.exists():
            self._load()

    @staticmethod
    def _key(class_name: str, n_variants: int, llm_id: str) -> tuple[str, int, str]:
        return (class_name.strip(), int(n_variants), llm_id)

    def _load(self) -> None:
        payload = json.loads(self._path.read_text(encoding="utf-8"))
        for entry in payload.get("entries", []):
            key = self._key(entry["class_name"], entry["n_variants"], entry["llm_id"])
            self._entries[key] = [str(d) for d in entry["descriptions"]]

    def _save(self) -> None:
        if self._path is None:
            return
        entries = [
            {
                "class_name": name,
                "n_variants": n,
                "llm_id": llm,
                "descriptions": descs,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
            for (name, n, llm), descs in sorted(self._entries.items())
        ]
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text(
            json.dumps({"entries": entries}, indent=2), encoding="utf-8"
        )

    def get(self, class_name: str, n_variants: int, llm_id: str) -> list[str] | None:
        hit = self._entries.get(self._key(class_name, n_variants, llm_id))
        return list(hit) if hit is not None else None

    def put(self, class_name: str, n_variants: int, llm_id: str, descriptions) -> None:
        with self._lock:
            self._entries[self._key(class_name, n_variants, llm_id)] = [
                str(d) for d in descriptions
            ]
            self._save()

    def __len__(self) -> int:
        return len(self._entries)


def fetch_variants(
    class_id: int,
    class_name: str,
    *,
    provider=None,
    cache: VariantCache | None = None,
    n_variants: int = 4,
    llm_id: str = "default",
    fallback: bool = True,
) -> SemanticVariantSet:
    """Descriptions for one class: cache first, then provider, then fallback.

    Provider results are persisted to the cache; fallback results are not
    (they are a degraded mode and must stay recognizable as such).
    """
    name = (class_name or "").strip()
    if not name:
        raise EmptyClassNameError("class name must be nonempty")

    if cache is not None:
        hit = cache.get(name, n_variants, llm_id)
        if hit is not None:
            return SemanticVariantSet(
                class_id, name, tuple(hit), VariantSource.CACHE_FILE
            )

    if provider is not None:
        try:
            descriptions = provider.generate_variants(name, n_variants)
        except ProviderUnavailable:
            if not fallback:
                raise
        else:
            if cache is not None:
                cache.put(name, n_variants, llm_id, descriptions)
            return SemanticVariantSet(
                class_id, name, tuple(descriptions), VariantSource.LLM_PROVIDER
            )
    elif not fallback:
        raise ProviderUnavailable("no variant provider configured and fallback disabled")

    return SemanticVariantSet(
        class_id, name, (FALLBACK_TEMPLATE.format(name),), VariantSource.FALLBACK
    )


def fit_dimension(v, target_dim: int) -> np.ndarray:
    """Fit a vector to target_dim by end-to-end tiling or truncation.

    Equal dims are the identity; shorter vectors repeat until the target is
    filled; longer vectors are truncated.
    """
    vec = as_vector(v)
    if target_dim < 1:
        raise ValueError("target_dim must be at least 1")
    if vec.shape[0] == target_dim:
        return vec
    return np.resize(vec, target_dim)


def semantic_features(
    variants: SemanticVariantSet, encoder, target_dim: int
) -> list[LabeledEmbedding]:
    """Embed each description and tag it as one SEMANTIC support row.

    Rows carry the class id, item_id 0 and view_id equal to the variant
    index, so the M variants of a class stay distinct (they are never
    averaged together).
    """
    if target_dim < 1:
        raise ValueError("target_dim must be at least 1")
    vectors = encoder.encode_texts(list(variants.descriptions))
    if len(vectors) != len(variants.descriptions):
        raise ValueError("encoder returned a different number of vectors than texts")
    return [
        LabeledEmbedding(
            class_id=variants.class_id,
            item_id=0,
            view_id=index,
            modality=Modality.SEMANTIC,
            vector=fit_dimension(vec, target_dim),
        )
        for index, vec in enumerate(vectors)
    ]


class ToyTextEncoder:
    """Deterministic offline stand-in for a pretrained text encoder.

    Each text maps to a fixed pseudo-random vector in [0, 1) seeded from its
    SHA-256 digest, matching the toy image encoder's value range.
    """

    def __init__(self, dim: int = 192):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        self.dim = dim

    def encode_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.Generator(np.random.PCG64(seed))
            out.append(rng.random(self.dim))
        return out


class ProviderTextEncoder:
    """Adapter over the provider client's text endpoint."""

    def __init__(self, client):
        self._client = client

    def encode_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        return self._client.embed_texts(list(texts))
