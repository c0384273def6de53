"""Offline batch extractor: image tree -> bank file, no engine import.

Mirrors the engine's record structure: one raw record per image (view 0),
optional view records (crops, rotations, jitter, reflection; view ids from
1, modality 1 for natural views and 2 for the reflection) and optional
semantic records (modality 3, one per description, view id = variant
index).  Views are produced with PIL primitives; jitter draws come from a
numpy stream seeded per (seed, class, item) so extraction is reproducible.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageEnhance, ImageOps

from .bankio import (
    MODALITY_GEOMETRIC,
    MODALITY_NATURAL,
    MODALITY_RAW,
    MODALITY_SEMANTIC,
    BankRecord,
    write_bank_file,
)
from .llm import VariantGenerator


@dataclass
class ViewSettings:
    crop_sizes: tuple[int, ...] = (120, 170, 200)
    rotation_degrees: tuple[float, ...] = (45.0, 90.0, 180.0, 270.0, 315.0)
    jitter: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.2)
    jitter_samples: int = 1
    include_reflection: bool = True


@dataclass
class ExtractStats:
    n_images: int = 0
    n_failed: int = 0
    counts: dict[int, int] = field(default_factory=dict)

    def bump(self, modality: int) -> None:
        self.counts[modality] = self.counts.get(modality, 0) + 1


def _center_crop(img: Image.Image, size: int) -> Image.Image:
    x0 = (img.width - size) // 2
    y0 = (img.height - size) // 2
    return img.crop((x0, y0, x0 + size, y0 + size))


def _jitter(img: Image.Image, settings: ViewSettings, rng: np.random.Generator):
    b_mag, c_mag, s_mag, h_mag = settings.jitter
    b = float(rng.uniform(1 - b_mag, 1 + b_mag))
    c = float(rng.uniform(1 - c_mag, 1 + c_mag))
    s = float(rng.uniform(1 - s_mag, 1 + s_mag))
    h = float(rng.uniform(-h_mag, h_mag))
    out = ImageEnhance.Brightness(img).enhance(b)
    out = ImageEnhance.Contrast(out).enhance(c)
    out = ImageEnhance.Color(out).enhance(s)
    if h != 0.0:
        hsv = np.asarray(out.convert("HSV")).copy()
        hsv[..., 0] = (hsv[..., 0].astype(np.int16) + round(h * 255)) % 256
        out = Image.fromarray(hsv, mode="HSV").convert("RGB")
    return out


def generate_view_images(
    img: Image.Image, settings: ViewSettings, rng: np.random.Generator
) -> list[tuple[int, int, Image.Image]]:
    """(view_id, modality, image) triples in the engine's deterministic order."""
    views = []
    next_id = 1
    for size in settings.crop_sizes:
        if size > min(img.width, img.height):
            raise ValueError(f"crop {size} exceeds image {img.width}x{img.height}")
        views.append((next_id, MODALITY_NATURAL, _center_crop(img, size)))
        next_id += 1
    for deg in settings.rotation_degrees:
        quarter = deg % 90.0 == 0.0
        rotated = img.rotate(
            deg, resample=Image.NEAREST if quarter else Image.BILINEAR,
            expand=quarter, fillcolor=(0, 0, 0),
        )
        views.append((next_id, MODALITY_NATURAL, rotated))
        next_id += 1
    for _ in range(settings.jitter_samples):
        views.append((next_id, MODALITY_NATURAL, _jitter(img, settings, rng)))
        next_id += 1
    if settings.include_reflection:
        views.append((next_id, MODALITY_GEOMETRIC, ImageOps.mirror(img)))
        next_id += 1
    return views


def _image_stream_seed(seed: int, class_id: int, item_id: int) -> int:
    mask = (1 << 64) - 1
    z = (seed * 0x9E3779B97F4A7C15 + class_id * 0xBF58476D1CE4E5B9 + item_id) & mask
    z = ((z ^ (z >> 30)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def batch_extract(
    image_root,
    out_bank,
    *,
    encoder,
    views: ViewSettings | None = None,
    semantics: bool = False,
    variants: VariantGenerator | None = None,
    n_variants: int = 4,
    seed: int = 0,
    dataset_name: str | None = None,
    warn=lambda msg: print(msg, file=sys.stderr),
) -> ExtractStats:
    """Encode a class-per-directory PNG tree into a bank file."""
    root = Path(image_root)
    if not root.is_dir():
        raise FileNotFoundError(f"image root not found: {root}")
    classes = [p for p in sorted(root.iterdir()) if p.is_dir() and list(p.glob("*.png"))]
    if not classes:
        raise FileNotFoundError(f"no class directories with PNGs under {root}")

    stats = ExtractStats()
    records: list[BankRecord] = []
    class_names = {cid: p.name for cid, p in enumerate(classes)}

    for class_id, class_dir in enumerate(classes):
        for item_id, path in enumerate(sorted(class_dir.glob("*.png"))):
            stats.n_images += 1
            try:
                img = Image.open(path)
                img.load()
                img = img.convert("RGB")
            except OSError as exc:
                stats.n_failed += 1
                warn(f"warning: skipping unreadable image {path}: {exc}")
                continue
            (vector,) = encoder.embed_images([img])
            records.append(BankRecord(class_id, item_id, 0, MODALITY_RAW, vector))
            stats.bump(MODALITY_RAW)
            if views is not None:
                rng = np.random.Generator(
                    np.random.PCG64(_image_stream_seed(seed, class_id, item_id))
                )
                triples = generate_view_images(img, views, rng)
                vectors = encoder.embed_images([v for _, _, v in triples])
                for (view_id, modality, _), vec in zip(triples, vectors):
                    records.append(
                        BankRecord(class_id, item_id, view_id, modality, vec)
                    )
                    stats.bump(modality)

    if stats.counts.get(MODALITY_RAW, 0) == 0:
        raise ValueError("all images failed to decode; nothing to extract")

    if semantics:
        if variants is None:
            raise ValueError("semantics requested but no variant generator given")
        for class_id, name in class_names.items():
            descriptions = variants.generate(name, n_variants)
            vectors = encoder.embed_texts(descriptions)
            for view_id, vec in enumerate(vectors):
                records.append(
                    BankRecord(class_id, 0, view_id, MODALITY_SEMANTIC, vec)
                )
                stats.bump(MODALITY_SEMANTIC)

    write_bank_file(
        out_bank,
        records,
        dataset_name=dataset_name or root.name,
        encoder_id=encoder.encoder_id,
        class_names=class_names,
        metadata={
            "extraction_seed": str(seed),
            "views": "on" if views is not None else "off",
            "semantics": "on" if semantics else "off",
        },
    )
    return stats
