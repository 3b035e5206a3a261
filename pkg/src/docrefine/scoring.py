"""HTTP client for the scorer service, plus an in-process mock double.

The service scores translation quality (reference-based "da", reference-free
"qe"), embeds sentences, and reports perplexity. The mock double reproduces
the service's mock mode bit-for-bit so pipeline tests never need a network:
scores fold a 64-bit FNV-1a hash of ``src|mt|ref`` into [0, 1].
"""

from __future__ import annotations

import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

logger = logging.getLogger(__name__)

METRICS = ("da", "qe")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TWO64 = 2**64


class ScorerError(RuntimeError):
    """Raised when the scorer service misbehaves or rejects a request."""


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _TWO64
    return h


def fold_unit(h: int) -> float:
    """Fold a 64-bit hash into [0, 1]."""
    return h / _TWO64


def mock_score(src: str, mt: str, ref: str = "") -> float:
    """Deterministic stand-in score, identical to the service's mock mode."""
    return fold_unit(fnv1a64(f"{src}|{mt}|{ref}".encode("utf-8")))


def mock_embedding(text: str, dim: int = 16) -> list[float]:
    """Deterministic unit vector derived from the text.

    The fixed positive first component keeps every pairwise cosine >= 0,
    mimicking real sentence embeddings, which cluster in a narrow cone;
    downstream coherence values then stay inside their reported range.
    """
    if dim < 2:
        raise ScorerError("embedding dim must be >= 2")
    raw = [math.sqrt(dim - 1.0)]
    raw.extend(
        2.0 * fold_unit(fnv1a64(f"{text}|e{j}".encode("utf-8"))) - 1.0
        for j in range(1, dim)
    )
    norm = math.sqrt(sum(x * x for x in raw))
    return [x / norm for x in raw]


def mock_ppl(text: str) -> float:
    """Deterministic positive perplexity in (1, 100]."""
    return 1.0 + 99.0 * fold_unit(fnv1a64(f"{text}|ppl".encode("utf-8")))


def _check_items(metric: str, items: list[dict]) -> None:
    if metric not in METRICS:
        raise ScorerError(f"unknown metric {metric!r}; expected one of {METRICS}")
    for i, item in enumerate(items):
        if "src" not in item or "mt" not in item:
            raise ScorerError(f"item {i} missing required src/mt fields")
        if metric == "da" and "ref" not in item:
            raise ScorerError(f"item {i}: metric 'da' requires a ref field")
        if metric == "qe" and "ref" in item:
            raise ScorerError(f"item {i}: metric 'qe' forbids a ref field")


class MockScorerDouble:
    """Drop-in scorer for tests; no network, pure integer hashing."""

    def score(self, metric: str, items: list[dict]) -> list[float]:
        _check_items(metric, items)
        return [
            mock_score(item["src"], item["mt"], item.get("ref", ""))
            for item in items
        ]

    def da_scores(self, items: list[dict]) -> list[float]:
        return self.score("da", items)

    def qe_scores(self, items: list[dict]) -> list[float]:
        return self.score("qe", items)

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [mock_embedding(t) for t in texts]

    def ppl(self, texts: list[str]) -> list[float]:
        return [mock_ppl(t) for t in texts]

    def health(self) -> dict:
        return {"status": "ok", "mode": "mock"}


@dataclass(frozen=True)
class ScorerConfig:
    base_url: str
    timeout: float = 60.0
    max_in_flight: int = 4
    batch_size: int = 64

    def __post_init__(self):
        if not self.base_url:
            raise ScorerError("base_url must be non-empty")
        if self.timeout <= 0:
            raise ScorerError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ScorerError("max_in_flight must be >= 1")
        if self.batch_size < 1:
            raise ScorerError("batch_size must be >= 1")


class ScorerClient:
    """Talks to a running scorer service over HTTP.

    Large inputs are split into batches posted concurrently, but results
    always come back in input order.
    """

    def __init__(self, config: ScorerConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._lock = threading.Lock()
        self.requests_sent = 0

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        with self._lock:
            self.requests_sent += 1
        try:
            resp = self._session.post(url, json=payload, timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise ScorerError(f"scorer request to {path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerError(
                f"scorer returned {resp.status_code} for {path}: {resp.text[:200]}"
            )
        try:
            return resp.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ScorerError(f"scorer sent malformed JSON for {path}") from exc

    def _batched(self, payload_items: list, build, extract) -> list:
        size = self.config.batch_size
        batches = [payload_items[i : i + size] for i in range(0, len(payload_items), size)]
        results: list = [None] * len(batches)
        if len(batches) == 1:
            results[0] = extract(self._post(*build(batches[0])))
        else:
            with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
                futures = {
                    pool.submit(self._post, *build(batch)): i
                    for i, batch in enumerate(batches)
                }
                for future, i in futures.items():
                    results[i] = extract(future.result())
        flat: list = []
        for i, (batch, part) in enumerate(zip(batches, results)):
            if len(part) != len(batch):
                raise ScorerError(
                    f"batch {i}: sent {len(batch)} items, got {len(part)} results"
                )
            flat.extend(part)
        return flat

    def score(self, metric: str, items: list[dict]) -> list[float]:
        _check_items(metric, items)
        if not items:
            return []
        return self._batched(
            items,
            lambda batch: ("/v1/score", {"metric": metric, "items": batch}),
            lambda body: body["scores"],
        )

    def da_scores(self, items: list[dict]) -> list[float]:
        return self.score("da", items)

    def qe_scores(self, items: list[dict]) -> list[float]:
        return self.score("qe", items)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        return self._batched(
            list(texts),
            lambda batch: ("/v1/embed", {"texts": batch}),
            lambda body: body["embeddings"],
        )

    def ppl(self, texts: list[str]) -> list[float]:
        if not texts:
            return []
        return self._batched(
            list(texts),
            lambda batch: ("/v1/ppl", {"texts": batch}),
            lambda body: body["ppls"],
        )

    def health(self) -> dict:
        url = self.config.base_url.rstrip("/") + "/v1/health"
        try:
            resp = self._session.get(url, timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise ScorerError(f"health check failed: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerError(f"health check returned {resp.status_code}")
        return resp.json()
