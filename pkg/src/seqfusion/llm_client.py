"""Chat-completion backends: live HTTP, a JSON-lines replay cache, and a
scripted mock for offline runs."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from seqfusion.errors import BackendError

log = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 1024
DEFAULT_CONCURRENCY = 4


class NetworkError(BackendError):
    pass


class RateLimitError(BackendError):
    pass


class AuthError(BackendError):
    pass


class CacheMissError(BackendError):
    pass


class EmptyResponseError(BackendError):
    pass


@dataclass(frozen=True)
class LlmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must not be empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        object.__setattr__(self, "temperature", float(self.temperature))


@dataclass(frozen=True)
class LlmResponse:
    text: str
    token_count: int
    latency: float
    backend_kind: str  # "live", "cache" or "mock"


def cache_key(request: LlmRequest) -> str:
    payload = json.dumps(
        {
            "model": request.model,
            "prompt": request.prompt,
            "temperature": float(request.temperature),
            "max_tokens": int(request.max_tokens),
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _count_tokens(text: str) -> int:
    return len(text.split())


class Backend:
    kind = "abstract"

    def complete(self, request: LlmRequest) -> LlmResponse:
        raise NotImplementedError


class MockBackend(Backend):
    """Scripted responses.

    Lookup order: *keyed* (by :func:`prompt_hash`), then *responder*, then
    the *ordered* list consumed front to back.
    """

    kind = "mock"

    def __init__(
        self,
        keyed: Mapping[str, str] | None = None,
        ordered: Sequence[str] | None = None,
        responder: Callable[[str], str] | None = None,
    ):
        self.keyed = dict(keyed or {})
        self._ordered = list(ordered or [])
        self.responder = responder
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, request: LlmRequest) -> LlmResponse:
        t0 = time.perf_counter()
        with self._lock:
            self.calls += 1
            key = prompt_hash(request.prompt)
            if key in self.keyed:
                text = self.keyed[key]
            elif self.responder is not None:
                text = self.responder(request.prompt)
            elif self._ordered:
                text = self._ordered.pop(0)
            else:
                raise CacheMissError("mock backend has no scripted response for this prompt")
        return LlmResponse(text, _count_tokens(text), time.perf_counter() - t0, "mock")


class LiveBackend(Backend):
    """OpenAI-style ``/chat/completions`` endpoint."""

    kind = "live"

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "OPENAI_API_KEY",
        *,
        max_attempts: int = 5,
        backoff: float = 1.0,
        timeout: float = 120.0,
        concurrency: int = DEFAULT_CONCURRENCY,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(concurrency)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "").strip()
        if not key:
            raise AuthError(f"environment variable {self.api_key_env} is not set")
        return key

    @property
    def url(self) -> str:
        if self.endpoint.endswith("/chat/completions"):
            return self.endpoint
        return self.endpoint + "/chat/completions"

    def _post(self, request: LlmRequest, key: str) -> httpx.Response:
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {key}"}
        with self._slots:
            return self._client.post(self.url, json=body, headers=headers)

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = self.api_key()
        t0 = time.perf_counter()
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._post(request, key)
            except httpx.TransportError as exc:
                last = NetworkError(f"request to {self.url} failed: {exc}")
                log.warning("attempt %d/%d: %s", attempt + 1, self.max_attempts, last)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"{self.url} rejected credentials ({resp.status_code})")
            if resp.status_code == 429:
                last = RateLimitError(f"{self.url} rate limited the request")
                log.warning("attempt %d/%d: rate limited", attempt + 1, self.max_attempts)
                continue
            if resp.status_code >= 500:
                last = NetworkError(f"{self.url} returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendError(f"{self.url} returned {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected response shape from {self.url}: {exc}") from None
            if not text:
                raise EmptyResponseError(f"{self.url} returned an empty completion")
            usage = data.get("usage") or {}
            tokens = usage.get("completion_tokens") or _count_tokens(text)
            return LlmResponse(text, int(tokens), time.perf_counter() - t0, "live")
        assert last is not None
        raise last


class ReplayBackend(Backend):
    """Serve responses from an append-only JSON-lines cache.

    On a miss the *fallback* is called and its answer recorded; without a
    fallback a miss raises :class:`CacheMissError`.
    """

    kind = "cache"

    def __init__(self, cache_path: "str | os.PathLike[str]", fallback: Backend | None = None):
        self.path = Path(cache_path)
        self.fallback = fallback
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._entries[rec["key"]] = rec["response"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    # a torn final line from a crash is skipped
                    log.warning("%s:%d: unreadable cache line skipped", self.path, lineno)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, request: LlmRequest) -> bool:
        return cache_key(request) in self._entries

    def _append(self, key: str, request: LlmRequest, response: LlmResponse) -> None:
        rec = {
            "key": key,
            "request": asdict(request),
            "response": {"text": response.text, "token_count": response.token_count},
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            fh.flush()
        self._entries[key] = rec["response"]

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = cache_key(request)
        t0 = time.perf_counter()
        with self._lock:
            hit = self._entries.get(key)
        if hit is not None:
            return LlmResponse(hit["text"], hit["token_count"], time.perf_counter() - t0, "cache")
        if self.fallback is None:
            raise CacheMissError(f"no cached response for request {key[:12]}")
        response = self.fallback.complete(request)
        with self._lock:
            self._append(key, request, response)
        return response


def complete(backend: Backend, request: LlmRequest) -> LlmResponse:
    return backend.complete(request)
