import base64

from conftest import b64, make_png_bytes


class TestHealth:
    def test_contract(self, client):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["encoder_id"] == "fixture-8x8"
        assert body["dim"] == 192


class TestEmbedImage:
    def test_shape_contract(self, client):
        payload = {"images_b64": [b64(make_png_bytes(i)) for i in range(3)]}
        resp = client.post("/v1/embed/image", json=payload)
        assert resp.status_code == 200
        body = resp.json()
        assert body["dim"] == 192
        assert len(body["vectors"]) == 3
        assert all(len(v) == body["dim"] for v in body["vectors"])

    def test_determinism(self, client):
        blob = b64(make_png_bytes(7))
        a = client.post("/v1/embed/image", json={"images_b64": [blob]}).json()
        b = client.post("/v1/embed/image", json={"images_b64": [blob]}).json()
        assert a == b

    def test_distinct_images_differ(self, client):
        payload = {"images_b64": [b64(make_png_bytes(1)), b64(make_png_bytes(2))]}
        body = client.post("/v1/embed/image", json=payload).json()
        assert body["vectors"][0] != body["vectors"][1]

    def test_missing_key_is_400(self, client):
        resp = client.post("/v1/embed/image", json={"imgs": []})
        assert resp.status_code == 400
        assert resp.json()["error"] == "MalformedRequest"

    def test_empty_list_is_400(self, client):
        assert client.post("/v1/embed/image", json={"images_b64": []}).status_code == 400

    def test_invalid_base64_is_400(self, client):
        resp = client.post("/v1/embed/image", json={"images_b64": ["@@not-base64@@"]})
        assert resp.status_code == 400
        assert resp.json()["error"] == "BadImage"

    def test_non_image_bytes_is_400(self, client):
        blob = base64.b64encode(b"definitely not a png").decode()
        resp = client.post("/v1/embed/image", json={"images_b64": [blob]})
        assert resp.status_code == 400


class TestEmbedText:
    def test_shape_contract(self, client):
        body = client.post(
            "/v1/embed/text", json={"texts": ["one", "two", "three"]}
        ).json()
        assert body["dim"] == 192
        assert len(body["vectors"]) == 3

    def test_determinism(self, client):
        a = client.post("/v1/embed/text", json={"texts": ["same"]}).json()
        b = client.post("/v1/embed/text", json={"texts": ["same"]}).json()
        assert a == b

    def test_blank_text_is_400(self, client):
        resp = client.post("/v1/embed/text", json={"texts": ["ok", "  "]})
        assert resp.status_code == 400
        assert resp.json()["error"] == "BadText"

    def test_empty_list_is_400(self, client):
        assert client.post("/v1/embed/text", json={"texts": []}).status_code == 400


class TestVariants:
    def test_cache_hit(self, client):
        resp = client.post(
            "/v1/variants", json={"class_name": "oak tree", "n_variants": 4}
        )
        assert resp.status_code == 200
        descriptions = resp.json()["descriptions"]
        assert len(descriptions) == 5
        assert descriptions[0] == "a photo of a oak tree"

    def test_cache_miss_without_llm_is_503(self, client, monkeypatch):
        monkeypatch.delenv("MPA_LLM_URL", raising=False)
        resp = client.post(
            "/v1/variants", json={"class_name": "unknown thing", "n_variants": 4}
        )
        assert resp.status_code == 503
        assert resp.json()["error"] == "VariantsUnavailable"

    def test_empty_class_name_is_400(self, client):
        resp = client.post("/v1/variants", json={"class_name": "  ", "n_variants": 4})
        assert resp.status_code == 400

    def test_bad_variant_count_is_400(self, client):
        resp = client.post("/v1/variants", json={"class_name": "x", "n_variants": 0})
        assert resp.status_code == 400


class TestDimConsistency:
    def test_health_dim_matches_all_vectors(self, client):
        dim = client.get("/v1/health").json()["dim"]
        img = client.post(
            "/v1/embed/image", json={"images_b64": [b64(make_png_bytes(3))]}
        ).json()
        txt = client.post("/v1/embed/text", json={"texts": ["abc"]}).json()
        assert img["dim"] == txt["dim"] == dim
        assert all(len(v) == dim for v in img["vectors"] + txt["vectors"])
