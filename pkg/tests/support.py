"""Shared test fixtures: synthetic image datasets and prewarmed caches."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

# Base colors for the noisy-cluster image dataset; class identity is carried
# by color so crops/rotations/reflections stay label-consistent.
BASE_COLORS = (
    (200, 40, 40),
    (40, 180, 40),
    (40, 60, 200),
    (210, 200, 40),
    (190, 40, 190),
    (40, 190, 190),
)


def make_noisy_cluster_images(
    root: Path,
    *,
    n_classes: int = 6,
    items_per_class: int = 20,
    side: int = 224,
    seed: int = 1234,
) -> Path:
    """Write a class-per-directory PNG tree of noisy color-field images.

    Each item is its class color field corrupted by random occluder
    rectangles, a global brightness factor and pixel noise, so raw
    embeddings form noisy per-class clusters.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    for cid in range(n_classes):
        color = BASE_COLORS[cid % len(BASE_COLORS)]
        class_dir = root / f"class_{cid}"
        class_dir.mkdir(parents=True, exist_ok=True)
        for iid in range(items_per_class):
            img = np.tile(np.array(color, dtype=np.float64), (side, side, 1))
            for _ in range(int(rng.integers(2, 5))):
                w, h = (int(v) for v in rng.integers(40, side // 2 + 8, 2))
                x = int(rng.integers(0, side - w))
                y = int(rng.integers(0, side - h))
                img[y : y + h, x : x + w] = rng.integers(0, 256, 3)
            img *= rng.uniform(0.6, 1.4)
            img += rng.normal(0.0, 20.0, img.shape)
            arr = np.clip(img, 0, 255).astype(np.uint8)
            Image.fromarray(arr).save(class_dir / f"item_{iid:03d}.png")
    return root


def write_variant_cache(path: Path, class_names, *, n_variants: int = 4,
                        llm_id: str = "default") -> Path:
    """Prewarm a variant cache with 1 + n_variants descriptions per class."""
    entries = []
    for name in class_names:
        descriptions = [f"a photo of a {name}"] + [
            f"{name} rendered as variant {k}" for k in range(n_variants)
        ]
        entries.append(
            {
                "class_name": name,
                "n_variants": n_variants,
                "llm_id": llm_id,
                "descriptions": descriptions,
                "timestamp": "fixed",
            }
        )
    path = Path(path)
    path.write_text(json.dumps({"entries": entries}, indent=2), encoding="utf-8")
    return path


def random_raster(rng: np.random.Generator, height: int, width: int):
    from mpa.hma import Raster

    return Raster(rng.integers(0, 256, (height, width, 3)).astype(np.uint8))
