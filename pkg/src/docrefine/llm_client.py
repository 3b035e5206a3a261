"""Client for chat-completion-compatible endpoints.

One POST per prompt against ``{base_url}/v1/chat/completions``, with
exponential-backoff retries for transient failures and a hard bound on
concurrently outstanding requests per endpoint. Beam count is sent as a
vendor extension field (``num_beams``); endpoints that reject unknown
fields simply ignore it, with greedy decoding as the fallback behaviour.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = {408, 429, 500, 502, 503, 504}
BACKOFF_FACTOR = 2.0
BACKOFF_CAP = 30.0
BACKOFF_JITTER = 0.2


class LLMClientError(RuntimeError):
    """Raised when a completion request fails permanently."""


class BatchError(LLMClientError):
    """Aggregate failure of a batch; carries per-index results and errors."""

    def __init__(self, results: list, errors: dict[int, Exception]):
        self.results = results
        self.errors = errors
        indices = ", ".join(str(i) for i in sorted(errors))
        super().__init__(f"batch failed at indices [{indices}]")


@dataclass(frozen=True)
class DecodeParams:
    """Decoding settings carried on every request.

    With ``do_sample`` off the endpoint sees temperature 0 / top_p 1
    (greedy); the configured sampling values only apply when sampling is
    enabled.
    """

    do_sample: bool = False
    temperature: float = 0.0
    top_p: float = 1.0
    num_beams: int = 3
    max_tokens: int = 1024

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.num_beams < 1 or self.max_tokens < 1:
            raise ValueError("num_beams and max_tokens must be >= 1")

    @classmethod
    def diverse(cls) -> "DecodeParams":
        """Sampling settings for generating diverse candidate translations."""
        return cls(do_sample=True, temperature=0.3, top_p=0.7)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str = "default"
    api_key: str | None = None
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 1.0

    def __post_init__(self):
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def resolve_api_key(self) -> str | None:
        if self.api_key:
            return self.api_key
        if self.api_key_env:
            return os.environ.get(self.api_key_env) or None
        return None


def _request_body(cfg: EndpointConfig, prompt: str, dp: DecodeParams) -> dict:
    return {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": dp.temperature if dp.do_sample else 0.0,
        "top_p": dp.top_p if dp.do_sample else 1.0,
        "max_tokens": dp.max_tokens,
        "num_beams": dp.num_beams,
    }


class LLMClient:
    """Thread-safe client; holds retry counters for one endpoint."""

    def __init__(self, cfg: EndpointConfig):
        self.cfg = cfg
        self._lock = threading.Lock()
        self.requests_sent = 0
        self.retries = 0

    def _count(self, attr: str) -> None:
        with self._lock:
            setattr(self, attr, getattr(self, attr) + 1)

    def _sleep_before_retry(self, attempt: int) -> None:
        delay = min(self.cfg.backoff_base * (BACKOFF_FACTOR**attempt), BACKOFF_CAP)
        delay *= 1 + random.uniform(-BACKOFF_JITTER, BACKOFF_JITTER)
        time.sleep(max(delay, 0.0))

    def complete(self, prompt: str, dp: DecodeParams | None = None) -> str:
        """Send one prompt; return the assistant message text."""
        dp = dp or DecodeParams()
        url = self.cfg.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = self.cfg.resolve_api_key()
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = _request_body(self.cfg, prompt, dp)
        request_id = uuid.uuid4().hex[:12]

        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt > 0:
                self._count("retries")
                self._sleep_before_retry(attempt - 1)
            self._count("requests_sent")
            logger.debug(
                "request %s attempt %d -> %s (%d chars)",
                request_id, attempt + 1, url, len(prompt),
            )
            try:
                resp = requests.post(
                    url, json=body, headers=headers, timeout=self.cfg.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                logger.debug("request %s transport error: %s", request_id, exc)
                continue
            if resp.status_code == 200:
                try:
                    content = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise LLMClientError(
                        f"request {request_id}: malformed completion body: "
                        f"{resp.text[:200]!r}"
                    ) from exc
                logger.debug(
                    "request %s ok (%d chars)", request_id, len(content or "")
                )
                return content if content is not None else ""
            if resp.status_code in RETRYABLE_STATUSES:
                last_error = LLMClientError(
                    f"HTTP {resp.status_code}: {resp.text[:200]!r}"
                )
                logger.debug(
                    "request %s retryable status %d", request_id, resp.status_code
                )
                continue
            raise LLMClientError(
                f"request {request_id}: HTTP {resp.status_code}: {resp.text[:200]!r}"
            )
        raise LLMClientError(
            f"request {request_id}: retry budget exhausted "
            f"({self.cfg.max_retries} retries): {last_error}"
        )

    def complete_batch(
        self,
        prompts: list[str],
        dp: DecodeParams | None = None,
        *,
        fail_fast: bool = False,
    ) -> list[str]:
        """Send prompts concurrently; results align positionally with inputs.

        At most ``max_in_flight`` requests are outstanding at once. By
        default every prompt is attempted and an aggregate ``BatchError``
        reports failed indices; with ``fail_fast`` the first failure wins.
        """
        if not prompts:
            raise ValueError("prompts must be non-empty")
        results: list[str | None] = [None] * len(prompts)
        errors: dict[int, Exception] = {}
        stop = threading.Event()

        def run(index: int, prompt: str) -> None:
            if stop.is_set():
                errors[index] = LLMClientError("cancelled by fail-fast")
                return
            try:
                results[index] = self.complete(prompt, dp)
            except Exception as exc:  # noqa: BLE001 - reported per index
                errors[index] = exc
                if fail_fast:
                    stop.set()

        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as pool:
            futures = [
                pool.submit(run, i, prompt) for i, prompt in enumerate(prompts)
            ]
            for future in futures:
                future.result()

        if errors:
            raise BatchError(results, errors)
        return results  # type: ignore[return-value]


def complete(cfg: EndpointConfig, prompt: str, dp: DecodeParams | None = None) -> str:
    return LLMClient(cfg).complete(prompt, dp)


def complete_batch(
    cfg: EndpointConfig,
    prompts: list[str],
    dp: DecodeParams | None = None,
    *,
    fail_fast: bool = False,
) -> list[str]:
    return LLMClient(cfg).complete_batch(prompts, dp, fail_fast=fail_fast)
