"""Secondary acceptance: wire-schema conformance and cross-package bank
compatibility with the evaluation engine, on a CPU-only 2-class fixture.
"""

import os
import threading
import time

import jsonschema
import numpy as np
import pytest

from conftest import b64, make_png_bytes, warm_cache, write_image_tree
from mpa_provider.encoders import FixtureEncoder
from mpa_provider.extract import ViewSettings, batch_extract
from mpa_provider.llm import VariantGenerator
from mpa_provider.service import ServiceConfig, create_app

EMBED_SCHEMA = {
    "type": "object",
    "required": ["dim", "vectors"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "vectors": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        },
    },
}

VARIANTS_SCHEMA = {
    "type": "object",
    "required": ["descriptions"],
    "properties": {
        "descriptions": {
            "type": "array",
            "minItems": 2,
            "items": {"type": "string", "minLength": 1},
        }
    },
}

HEALTH_SCHEMA = {
    "type": "object",
    "required": ["status", "encoder_id", "dim"],
    "properties": {
        "status": {"const": "ok"},
        "encoder_id": {"type": "string", "minLength": 1},
        "dim": {"type": "integer", "minimum": 1},
    },
}


def test_s1_protocol_conformance_and_bank_compat(tmp_path, client):
    t0 = time.perf_counter()

    # responses validate against the wire schemas
    health = client.get("/v1/health").json()
    jsonschema.validate(health, HEALTH_SCHEMA)

    img_body = client.post(
        "/v1/embed/image",
        json={"images_b64": [b64(make_png_bytes(i)) for i in range(2)]},
    ).json()
    jsonschema.validate(img_body, EMBED_SCHEMA)
    assert all(len(v) == health["dim"] for v in img_body["vectors"])

    txt_body = client.post("/v1/embed/text", json={"texts": ["a", "b"]}).json()
    jsonschema.validate(txt_body, EMBED_SCHEMA)

    var_body = client.post(
        "/v1/variants", json={"class_name": "oak tree", "n_variants": 4}
    ).json()
    jsonschema.validate(var_body, VARIANTS_SCHEMA)
    assert len(var_body["descriptions"]) == 5

    # banks written by batch_extract parse in the evaluation engine with
    # matching per-modality counts
    from mpa.bank import load_bank
    from mpa.model import Modality

    images = write_image_tree(tmp_path / "imgs", n_classes=2, items=4, side=224)
    cache = warm_cache(tmp_path / "cache.json", ["class_0", "class_1"])
    out = tmp_path / "fixture.bank"
    stats = batch_extract(
        images,
        out,
        encoder=FixtureEncoder(),
        views=ViewSettings(),
        semantics=True,
        variants=VariantGenerator(cache_path=cache),
        seed=5,
    )
    bank = load_bank(out)
    by_modality = {m: 0 for m in Modality}
    for rec in bank.records:
        by_modality[rec.modality] += 1
    assert by_modality[Modality.VISUAL_RAW] == stats.counts[0] == 8
    assert by_modality[Modality.VISUAL_NATURAL] == stats.counts[1] == 72
    assert by_modality[Modality.VISUAL_GEOMETRIC] == stats.counts[2] == 8
    assert by_modality[Modality.SEMANTIC] == stats.counts[3] == 10
    assert bank.manifest.class_names == {0: "class_0", 1: "class_1"}
    assert bank.dim == 192

    # and the engine can actually evaluate on it
    from mpa.episodes import PipelineFlags, RunConfig, run_evaluation
    from mpa.model import EpisodeSpec

    report = run_evaluation(
        bank,
        EpisodeSpec(n_way=2, k_shot=1, q_queries=2, seed=9),
        RunConfig(flags=PipelineFlags(True, True, True)),
        3,
    )
    assert report.n_episodes == 3
    assert all(0.0 <= a <= 1.0 for a in report.accuracies)

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"conformance took {elapsed:.1f}s"
    print("\nACCEPTANCE provider-protocol-conformance: PASS")


def test_s2_engine_bank_parses_in_provider(tmp_path):
    """Reverse direction: engine-written banks load with the provider reader."""
    from mpa.bank import Manifest, write_bank
    from mpa.model import LabeledEmbedding, Modality

    from mpa_provider.bankio import read_bank_file

    rng = np.random.default_rng(4)
    records = [
        LabeledEmbedding(c, i, 0, Modality.VISUAL_RAW, rng.standard_normal(16))
        for c in range(2)
        for i in range(3)
    ]
    path = tmp_path / "engine.bank"
    write_bank(records, Manifest("x", "toy", {0: "a", 1: "b"}), path)

    loaded, manifest = read_bank_file(path)
    assert len(loaded) == 6
    assert manifest["class_names"] == {"0": "a", "1": "b"}
    for original, back in zip(records, loaded):
        assert np.allclose(
            original.vector.astype(np.float32), np.asarray(back.vector), atol=0
        )
    print("\nACCEPTANCE provider-bank-reverse-compat: PASS")


def test_s3_live_service_with_engine_client(variant_cache):
    """The engine's HTTP client drives a live service over real sockets."""
    import uvicorn

    from mpa.provider import ProviderClient, ProviderConfig

    app = create_app(
        ServiceConfig(encoder_id="fixture", variant_cache_path=str(variant_cache))
    )
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]

    try:
        client = ProviderClient(
            ProviderConfig(base_url=f"http://127.0.0.1:{port}", timeout=10.0,
                           max_in_flight=2, retry_count=1)
        )
        health = client.health()
        assert health["encoder_id"] == "fixture-8x8"

        blobs = [make_png_bytes(i) for i in range(5)]
        vectors = client.embed_images(blobs)
        assert len(vectors) == 5
        assert all(v.shape == (health["dim"],) for v in vectors)
        again = client.embed_images(blobs)
        for a, b in zip(vectors, again):
            assert np.array_equal(a, b)

        texts = client.embed_texts(["alpha", "beta", "gamma"])
        assert len(texts) == 3

        descriptions = client.generate_variants("oak tree", 4)
        assert len(descriptions) == 5
    finally:
        server.should_exit = True
        thread.join(timeout=10)
    print("\nACCEPTANCE provider-live-wire: PASS")


@pytest.mark.skipif(
    not os.environ.get("MPA_SMOKE_EUROSAT"),
    reason="real-encoder smoke test needs a dataset download and model weights; "
    "set MPA_SMOKE_EUROSAT=<image root> to run",
)
def test_s4_real_encoder_smoke():
    """Optional: ViT-B/32-class encoder on an EuroSAT subsample.

    Expects MPA_SMOKE_EUROSAT to point at a class-per-directory PNG tree.
    Baseline (flags off) 5-way 1-shot accuracy must land within 5 points of
    the published ViT-B/32 baseline of 65.47%.
    """
    import tempfile

    from mpa.bank import load_bank
    from mpa.episodes import RunConfig, run_evaluation
    from mpa.model import EpisodeSpec

    from mpa_provider.encoders import build_encoder

    encoder = build_encoder("openai/clip-vit-base-patch32")
    with tempfile.TemporaryDirectory() as td:
        out = f"{td}/eurosat.bank"
        batch_extract(os.environ["MPA_SMOKE_EUROSAT"], out, encoder=encoder)
        bank = load_bank(out)
        report = run_evaluation(
            bank, EpisodeSpec(n_way=5, k_shot=1, q_queries=15, seed=0),
            RunConfig(), 100,
        )
    assert abs(report.mean_accuracy * 100 - 65.47) <= 5.0
