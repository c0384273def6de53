"""Encoder backends: a CLIP-family wrapper and an offline fixture encoder.

Backends expose ``encoder_id``, ``dim``, ``embed_images(pil_images)`` and
``embed_texts(texts)``; vectors come back as plain float lists ready for
JSON.  Embeddings are deterministic for identical inputs: models run in
inference mode with their published preprocessing, and the fixture encoder
is a pure function of the pixel/text bytes.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

FIXTURE_ENCODER_ID = "fixture-8x8"
FIXTURE_DIM = 192


class FixtureEncoder:
    """CPU-only deterministic encoder for fixture tests; no ML dependencies.

    Images are box-filtered to 8x8 RGB and scaled to [0, 1]; texts map to
    hash-seeded pseudo-random vectors in [0, 1).
    """

    encoder_id = FIXTURE_ENCODER_ID
    dim = FIXTURE_DIM

    def embed_images(self, images: list[Image.Image]) -> list[list[float]]:
        out = []
        for img in images:
            small = img.convert("RGB").resize((8, 8), Image.BOX)
            arr = np.asarray(small, dtype=np.float64) / 255.0
            out.append([float(x) for x in arr.ravel()])
        return out

    def embed_texts(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.Generator(np.random.PCG64(seed))
            out.append([float(x) for x in rng.random(self.dim)])
        return out


class ClipEncoder:
    """Wrapper around a pretrained CLIP-family checkpoint (torch required).

    Preprocessing follows the checkpoint's own processor; weights load once
    and run under inference mode on the configured device.
    """

    def __init__(self, encoder_id: str, device: str = "cpu"):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.encoder_id = encoder_id
        self.device = device
        self._model = CLIPModel.from_pretrained(encoder_id).to(device).eval()
        self._processor = CLIPProcessor.from_pretrained(encoder_id)
        self.dim = int(self._model.config.projection_dim)

    def embed_images(self, images: list[Image.Image]) -> list[list[float]]:
        inputs = self._processor(
            images=[img.convert("RGB") for img in images], return_tensors="pt"
        ).to(self.device)
        with self._torch.inference_mode():
            features = self._model.get_image_features(**inputs)
        return [[float(x) for x in row] for row in features.cpu().numpy()]

    def embed_texts(self, texts: list[str]) -> list[list[float]]:
        inputs = self._processor(
            text=texts, return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with self._torch.inference_mode():
            features = self._model.get_text_features(**inputs)
        return [[float(x) for x in row] for row in features.cpu().numpy()]


def build_encoder(encoder_id: str, device: str = "cpu"):
    """Select a backend: the reserved id "fixture" avoids any model load."""
    if encoder_id in (FIXTURE_ENCODER_ID, "fixture", "toy"):
        return FixtureEncoder()
    return ClipEncoder(encoder_id, device)
