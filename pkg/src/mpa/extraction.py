"""Directory-to-bank extraction used by the CLI.

Expects one subdirectory per class containing PNG files; class ids follow
the sorted directory names, item ids the sorted file names.  Raw embeddings
are always extracted; view records are added when a ViewPlan is given and
semantic records when a text encoder is given.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

from .bank import Manifest
from .exceptions import FormatError
from .hma import ViewPlan, embed_views, generate_views, load_raster
from .lmse import VariantCache, fetch_variants, semantic_features
from .model import LabeledEmbedding, Modality
from .rng import STREAM_AUGMENT, stream


@dataclass
class ExtractionStats:
    n_images: int = 0
    n_failed: int = 0
    n_raw: int = 0
    n_views: int = 0
    n_semantic: int = 0


def discover_classes(image_dir) -> list[tuple[str, list[Path]]]:
    """(class name, sorted PNG paths) per subdirectory, sorted by name."""
    root = Path(image_dir)
    if not root.is_dir():
        raise FormatError(f"image directory not found: {root}")
    classes = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if not sub.name.strip():
            raise FormatError(f"class directory has an empty name under {root}")
        files = sorted(sub.glob("*.png"))
        if files:
            classes.append((sub.name, files))
    if not classes:
        raise FormatError(f"no class directories with PNG files under {root}")
    return classes


def extract_directory(
    image_dir,
    image_encoder,
    *,
    plan: ViewPlan | None = None,
    text_encoder=None,
    variant_provider=None,
    variant_cache: VariantCache | None = None,
    n_variants: int = 4,
    llm_id: str = "default",
    fallback: bool = True,
    seed: int = 0,
    dataset_name: str | None = None,
    encoder_id: str = "unknown",
    target_dim: int | None = None,
    warn=lambda msg: print(msg, file=sys.stderr),
) -> tuple[list[LabeledEmbedding], Manifest, ExtractionStats]:
    """Encode a class-per-directory image tree into bank records."""
    classes = discover_classes(image_dir)
    stats = ExtractionStats()
    records: list[LabeledEmbedding] = []

    for class_id, (_name, files) in enumerate(classes):
        for item_id, path in enumerate(files):
            stats.n_images += 1
            try:
                raster = load_raster(path)
            except Exception as exc:  # unreadable file: warn and continue
                stats.n_failed += 1
                warn(f"warning: skipping unreadable image {path}: {exc}")
                continue
            raw_vec = image_encoder.encode_images([raster])[0]
            records.append(
                LabeledEmbedding(
                    class_id=class_id,
                    item_id=item_id,
                    view_id=0,
                    modality=Modality.VISUAL_RAW,
                    vector=raw_vec,
                )
            )
            stats.n_raw += 1
            if plan is not None:
                rng = stream(seed, STREAM_AUGMENT, class_id, item_id)
                views = generate_views(raster, plan, rng)
                if views:
                    rows = embed_views(
                        views, image_encoder, class_id=class_id, item_id=item_id
                    )
                    records.extend(rows)
                    stats.n_views += len(rows)

    if stats.n_raw == 0:
        raise FormatError("all images failed to decode; nothing to extract")

    dim = records[0].dim if target_dim is None else target_dim
    if text_encoder is not None:
        for class_id, (name, _files) in enumerate(classes):
            variants = fetch_variants(
                class_id,
                name,
                provider=variant_provider,
                cache=variant_cache,
                n_variants=n_variants,
                llm_id=llm_id,
                fallback=fallback,
            )
            rows = semantic_features(variants, text_encoder, dim)
            records.extend(rows)
            stats.n_semantic += len(rows)

    manifest = Manifest(
        dataset_name=dataset_name or Path(image_dir).name,
        encoder_id=encoder_id,
        class_names={cid: name for cid, (name, _) in enumerate(classes)},
        metadata={
            "extraction_seed": str(seed),
            "views": "on" if plan is not None else "off",
            "semantics": "on" if text_encoder is not None else "off",
        },
    )
    return records, manifest, stats
