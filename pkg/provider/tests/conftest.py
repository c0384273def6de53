from __future__ import annotations

import base64
import io
import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from mpa_provider.llm import VariantGenerator
from mpa_provider.service import ServiceConfig, create_app


def make_png_bytes(seed: int = 0, side: int = 32) -> bytes:
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, (side, side, 3)).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def write_image_tree(root: Path, n_classes=2, items=4, side=224, seed=0) -> Path:
    rng = np.random.default_rng(seed)
    for cid in range(n_classes):
        d = root / f"class_{cid}"
        d.mkdir(parents=True)
        for iid in range(items):
            arr = rng.integers(0, 256, (side, side, 3)).astype(np.uint8)
            Image.fromarray(arr).save(d / f"img_{iid}.png")
    return root


def warm_cache(path: Path, class_names, n_variants=4, llm_id="default") -> Path:
    entries = [
        {
            "class_name": name,
            "n_variants": n_variants,
            "llm_id": llm_id,
            "descriptions": [f"a photo of a {name}"]
            + [f"{name}, view {k}" for k in range(n_variants)],
            "timestamp": "fixed",
        }
        for name in class_names
    ]
    path.write_text(json.dumps({"entries": entries}))
    return path


@pytest.fixture
def variant_cache(tmp_path) -> Path:
    return warm_cache(tmp_path / "variants.json", ["class_0", "class_1", "oak tree"])


@pytest.fixture
def client(variant_cache) -> TestClient:
    app = create_app(
        ServiceConfig(encoder_id="fixture", variant_cache_path=str(variant_cache))
    )
    return TestClient(app)


@pytest.fixture
def generator(variant_cache) -> VariantGenerator:
    return VariantGenerator(cache_path=variant_cache)
