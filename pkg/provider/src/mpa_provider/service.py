"""HTTP service exposing the embedding wire protocol.

Endpoints mirror the engine's client contract exactly:

    POST /v1/embed/image  {"images_b64": [...]}             -> {"dim", "vectors"}
    POST /v1/embed/text   {"texts": [...]}                  -> {"dim", "vectors"}
    POST /v1/variants     {"class_name", "n_variants"}      -> {"descriptions"}
    GET  /v1/health                                         -> {"status", "encoder_id", "dim"}

Malformed bodies answer 400 with an error class; model failures answer 503.
Request handling is stateless (the variant cache is the only mutable state,
serialized through its own writer lock), so identical inputs always produce
identical vectors.
"""

from __future__ import annotations

import base64
import binascii
import io
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .encoders import build_encoder
from .llm import VariantGenerator, VariantsUnavailable


@dataclass
class ServiceConfig:
    encoder_id: str = "fixture"
    llm_id: str = "default"
    device: str = "cpu"
    port: int = 8765
    variant_cache_path: str | None = None


class ImageRequest(BaseModel):
    images_b64: list[str] = Field(min_length=1)


class TextRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class VariantsRequest(BaseModel):
    class_name: str
    n_variants: int = 4


def _error(code: int, error_class: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=code,
                        content={"error": error_class, "message": message})


def create_app(config: ServiceConfig | None = None,
               encoder=None, variants: VariantGenerator | None = None) -> FastAPI:
    config = config or ServiceConfig()
    encoder = encoder or build_encoder(config.encoder_id, config.device)
    variants = variants or VariantGenerator(
        llm_id=config.llm_id, cache_path=config.variant_cache_path
    )

    app = FastAPI(title="mpa-provider", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_request: Request, exc: RequestValidationError):
        return _error(400, "MalformedRequest", str(exc.errors()[:3]))

    def embed_response(vectors: list[list[float]]) -> dict:
        for vec in vectors:
            if len(vec) != encoder.dim:
                raise RuntimeError(
                    f"encoder emitted dim {len(vec)}, declared {encoder.dim}"
                )
        return {"dim": encoder.dim, "vectors": vectors}

    @app.post("/v1/embed/image")
    def embed_image(body: ImageRequest):
        images = []
        for i, b64 in enumerate(body.images_b64):
            try:
                blob = base64.b64decode(b64, validate=True)
                img = Image.open(io.BytesIO(blob))
                img.load()
            except (binascii.Error, OSError) as exc:
                return _error(400, "BadImage", f"images_b64[{i}]: {exc}")
            images.append(img)
        try:
            return embed_response(encoder.embed_images(images))
        except Exception as exc:  # model failure
            return _error(503, "ModelFailure", str(exc))

    @app.post("/v1/embed/text")
    def embed_text(body: TextRequest):
        for i, text in enumerate(body.texts):
            if not text.strip():
                return _error(400, "BadText", f"texts[{i}] is empty")
        try:
            return embed_response(encoder.embed_texts(list(body.texts)))
        except Exception as exc:
            return _error(503, "ModelFailure", str(exc))

    @app.post("/v1/variants")
    def variants_endpoint(body: VariantsRequest):
        if not body.class_name.strip():
            return _error(400, "BadClassName", "class_name is empty")
        if body.n_variants < 1:
            return _error(400, "BadVariantCount", "n_variants must be at least 1")
        try:
            descriptions = variants.generate(body.class_name, body.n_variants)
        except VariantsUnavailable as exc:
            return _error(503, "VariantsUnavailable", str(exc))
        return {"descriptions": descriptions}

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "encoder_id": encoder.encoder_id, "dim": encoder.dim}

    return app
