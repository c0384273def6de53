"""HTTP client for the embedding provider protocol.

Endpoints (JSON bodies):

    POST {base}/v1/embed/image   {"images_b64": [...]}            -> {"dim": D, "vectors": [[...], ...]}
    POST {base}/v1/embed/text    {"texts": [...]}                 -> {"dim": D, "vectors": [[...], ...]}
    POST {base}/v1/variants      {"class_name": s, "n_variants": n} -> {"descriptions": [...]}
    GET  {base}/v1/health                                          -> {"status": "ok", "encoder_id": s, "dim": D}

Inputs are chunked into batches of at most ``max_in_flight`` items and the
batches are issued concurrently (at most ``max_in_flight`` in flight).
Results are stitched back by batch index, never by arrival order.  Transport
failures and 5xx responses are retried with exponential backoff (base 250 ms,
doubling) up to ``retry_count`` extra attempts; requests are idempotent so
this is safe.
"""

from __future__ import annotations

import base64
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import requests

from .exceptions import (
    EmptyClassNameError,
    FormatError,
    ProviderContractViolation,
    ProviderUnavailable,
)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_BACKOFF_BASE_SECONDS = 0.25

DEFAULT_PROVIDER_URL = "http://127.0.0.1:8765"
PROVIDER_URL_ENV = "MPA_PROVIDER_URL"


def _default_base_url() -> str:
    return os.environ.get(PROVIDER_URL_ENV, DEFAULT_PROVIDER_URL)


@dataclass
class ProviderConfig:
    base_url: str = field(default_factory=_default_base_url)
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_count: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.retry_count < 0:
            raise ValueError("retry_count must be non-negative")


class ProviderClient:
    """Thread-safe client; one instance may serve concurrent callers."""

    def __init__(self, config: ProviderConfig | None = None, session=None):
        self.config = config or ProviderConfig()
        self._session = session or requests.Session()

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, endpoint: str, payload=None) -> dict:
        url = self.config.base_url.rstrip("/") + endpoint
        last_error = "unknown"
        for attempt in range(self.config.retry_count + 1):
            if attempt:
                time.sleep(_BACKOFF_BASE_SECONDS * (2 ** (attempt - 1)))
            try:
                resp = self._session.request(
                    method, url, json=payload, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if 500 <= resp.status_code < 600:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ProviderContractViolation(
                    f"{endpoint} answered HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProviderContractViolation(
                    f"{endpoint} returned a non-JSON body"
                ) from exc
            if not isinstance(body, dict):
                raise ProviderContractViolation(f"{endpoint} body is not an object")
            return body
        raise ProviderUnavailable(
            f"{url} unreachable after {self.config.retry_count + 1} attempts: {last_error}"
        )

    # -- embeddings --------------------------------------------------------

    def _parse_vectors(self, endpoint: str, body: dict, expected: int) -> tuple[int, list[np.ndarray]]:
        if "dim" not in body or "vectors" not in body:
            raise ProviderContractViolation(f"{endpoint} body lacks dim/vectors")
        dim = body["dim"]
        vectors = body["vectors"]
        if not isinstance(dim, int) or dim < 1:
            raise ProviderContractViolation(f"{endpoint} declared bad dim {dim!r}")
        if not isinstance(vectors, list) or len(vectors) != expected:
            got = len(vectors) if isinstance(vectors, list) else "non-list"
            raise ProviderContractViolation(
                f"{endpoint} returned {got} vectors for {expected} inputs"
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != dim:
                raise ProviderContractViolation(
                    f"{endpoint} vector has shape {arr.shape}, declared dim {dim}"
                )
            if not np.all(np.isfinite(arr)):
                raise ProviderContractViolation(f"{endpoint} vector is non-finite")
            out.append(arr)
        return dim, out

    def _embed_batched(self, endpoint: str, key: str, items: list) -> list[np.ndarray]:
        size = self.config.max_in_flight
        chunks = [items[i : i + size] for i in range(0, len(items), size)]

        def run(chunk):
            body = self._request("POST", endpoint, {key: chunk})
            return self._parse_vectors(endpoint, body, len(chunk))

        # Futures are keyed by chunk index: results are reassembled by that
        # request identifier, so arrival order cannot reorder outputs.
        if len(chunks) == 1:
            results = [run(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=size) as pool:
                futures = {i: pool.submit(run, c) for i, c in enumerate(chunks)}
                results = [futures[i].result() for i in range(len(chunks))]

        dims = {dim for dim, _ in results}
        if len(dims) != 1:
            raise ProviderContractViolation(
                f"{endpoint} declared inconsistent dims across batches: {sorted(dims)}"
            )
        vectors: list[np.ndarray] = []
        for _, chunk_vectors in results:
            vectors.extend(chunk_vectors)
        return vectors

    def embed_images(self, images: list[bytes]) -> list[np.ndarray]:
        """Embed PNG byte streams, one vector per image, order preserved."""
        if not images:
            raise ValueError("images must be nonempty")
        for i, blob in enumerate(images):
            if not isinstance(blob, (bytes, bytearray)) or not bytes(blob).startswith(
                PNG_SIGNATURE
            ):
                raise FormatError(f"images[{i}] is not a PNG byte stream")
        payload = [base64.b64encode(bytes(b)).decode("ascii") for b in images]
        return self._embed_batched("/v1/embed/image", "images_b64", payload)

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        """Embed text strings, one vector per text, order preserved."""
        if not texts:
            raise ValueError("texts must be nonempty")
        for i, text in enumerate(texts):
            if not isinstance(text, str) or not text.strip():
                raise ValueError(f"texts[{i}] is empty")
        return self._embed_batched("/v1/embed/text", "texts", list(texts))

    # -- variants ----------------------------------------------------------

    def generate_variants(self, class_name: str, n_variants: int = 4) -> list[str]:
        """Original class description plus ``n_variants`` paraphrases."""
        name = (class_name or "").strip()
        if not name:
            raise EmptyClassNameError("class_name must be nonempty")
        if n_variants < 1:
            raise ValueError("n_variants must be at least 1")
        body = self._request(
            "POST", "/v1/variants", {"class_name": name, "n_variants": n_variants}
        )
        descriptions = body.get("descriptions")
        if not isinstance(descriptions, list):
            raise ProviderContractViolation("/v1/variants body lacks descriptions")
        if len(descriptions) != 1 + n_variants:
            raise ProviderContractViolation(
                f"/v1/variants returned {len(descriptions)} descriptions, "
                f"expected {1 + n_variants}"
            )
        cleaned = []
        for desc in descriptions:
            if not isinstance(desc, str) or not desc.strip():
                raise ProviderContractViolation("/v1/variants returned an empty description")
            cleaned.append(desc)
        return cleaned

    # -- health ------------------------------------------------------------

    def health(self) -> dict:
        body = self._request("GET", "/v1/health")
        if body.get("status") != "ok":
            raise ProviderContractViolation(f"health status {body.get('status')!r}")
        if not isinstance(body.get("dim"), int) or body["dim"] < 1:
            raise ProviderContractViolation("health lacks a valid dim")
        if not isinstance(body.get("encoder_id"), str):
            raise ProviderContractViolation("health lacks encoder_id")
        return body
