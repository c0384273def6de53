from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from support import make_noisy_cluster_images, write_variant_cache  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(scope="session")
def noisy_cluster_bank_path(tmp_path_factory) -> Path:
    """Bank extracted from the noisy-cluster image fixture with all modalities.

    Built once per session: 6 classes x 20 items at 224x224, toy encoders,
    default view plan, semantic rows from a prewarmed 5-description cache.
    """
    from mpa.bank import write_bank
    from mpa.extraction import extract_directory
    from mpa.hma import ToyImageEncoder, ViewPlan
    from mpa.lmse import ToyTextEncoder, VariantCache

    root = tmp_path_factory.mktemp("noisy_cluster")
    image_dir = make_noisy_cluster_images(root / "images", seed=1234)
    cache_path = write_variant_cache(
        root / "variants.json", [f"class_{c}" for c in range(6)]
    )
    records, manifest, _stats = extract_directory(
        image_dir,
        ToyImageEncoder(),
        plan=ViewPlan(),
        text_encoder=ToyTextEncoder(),
        variant_cache=VariantCache(cache_path),
        seed=5,
        encoder_id="toy-8x8-192",
    )
    bank_path = root / "noisy.bank"
    write_bank(records, manifest, bank_path)
    return bank_path


@pytest.fixture(scope="session")
def noisy_cluster_bank(noisy_cluster_bank_path):
    from mpa.bank import load_bank

    return load_bank(noisy_cluster_bank_path)


@pytest.fixture(scope="session")
def synth_banks(tmp_path_factory):
    """(separated, clustered) synthetic banks, 5 classes, dim 64."""
    from mpa.bank import Bank
    from mpa.synth import make_synthetic_bank

    banks = {}
    for regime in ("separated", "clustered"):
        records, manifest = make_synthetic_bank(regime, 5, 64, seed=7)
        banks[regime] = Bank(records, manifest)
    return banks["separated"], banks["clustered"]
