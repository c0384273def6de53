"""Class-description variants: persistent cache plus an external LLM client.

The service hosts no model; descriptions come from the cache or from an
OpenAI-style chat-completions endpoint configured through MPA_LLM_URL /
MPA_LLM_KEY.  Responses are cached keyed by (class_name, n_variants,
llm_id) so reruns make zero LLM calls, and the temperature stays low so
per-class variants are stable across runs.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timezone
from pathlib import Path

import requests

PROMPT_TEMPLATE = (
    "Please generate an appearance description for {}, with four paraphrased variants."
)

LLM_URL_ENV = "MPA_LLM_URL"
LLM_KEY_ENV = "MPA_LLM_KEY"


class VariantsUnavailable(Exception):
    """No cached entry and no reachable LLM endpoint."""


class VariantGenerator:
    def __init__(
        self,
        llm_id: str = "default",
        cache_path=None,
        api_url: str | None = None,
        api_key: str | None = None,
    ):
        self.llm_id = llm_id
        self.api_url = api_url or os.environ.get(LLM_URL_ENV)
        self.api_key = api_key or os.environ.get(LLM_KEY_ENV)
        self._path = Path(cache_path) if cache_path else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, int, str], list[str]] = {}
        self.llm_calls = 0
        if self._path is not None and self._path.exists():
            payload = json.loads(self._path.read_text(encoding="utf-8"))
            for entry in payload.get("entries", []):
                key = (entry["class_name"], int(entry["n_variants"]), entry["llm_id"])
                self._entries[key] = [str(d) for d in entry["descriptions"]]

    def _save(self) -> None:
        if self._path is None:
            return
        entries = [
            {
                "class_name": name,
                "n_variants": n,
                "llm_id": llm,
                "descriptions": descs,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
            for (name, n, llm), descs in sorted(self._entries.items())
        ]
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text(json.dumps({"entries": entries}, indent=2),
                              encoding="utf-8")

    def _call_llm(self, class_name: str, n_variants: int) -> list[str]:
        if not self.api_url:
            raise VariantsUnavailable(
                f"no cached variants for {class_name!r} and no LLM endpoint configured"
            )
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        prompt = PROMPT_TEMPLATE.format(class_name)
        try:
            resp = requests.post(
                self.api_url.rstrip("/") + "/chat/completions",
                headers=headers,
                json={
                    "model": self.llm_id,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0.2,
                },
                timeout=60,
            )
            resp.raise_for_status()
            content = resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise VariantsUnavailable(f"LLM call failed: {exc}") from exc
        self.llm_calls += 1
        lines = [ln.strip(" -*") for ln in content.splitlines() if ln.strip(" -*")]
        if len(lines) < 1 + n_variants:
            raise VariantsUnavailable(
                f"LLM returned {len(lines)} usable lines, need {1 + n_variants}"
            )
        return lines[: 1 + n_variants]

    def generate(self, class_name: str, n_variants: int = 4) -> list[str]:
        """1 + n_variants descriptions, from cache when available."""
        name = class_name.strip()
        if not name:
            raise ValueError("class_name must be nonempty")
        if n_variants < 1:
            raise ValueError("n_variants must be at least 1")
        key = (name, n_variants, self.llm_id)
        hit = self._entries.get(key)
        if hit is not None:
            return list(hit)
        descriptions = self._call_llm(name, n_variants)
        with self._lock:
            self._entries[key] = descriptions
            self._save()
        return list(descriptions)
