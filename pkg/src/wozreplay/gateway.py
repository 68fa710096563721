"""Provider-agnostic inference boundary.

Two providers: a deterministic local mock (no key, no network) and a
remote chat-completions HTTP endpoint. The mock's output is a pure
function of the request so the whole pipeline becomes reproducible in
tests and offline experiments.

Mock contract: 64-bit FNV-1a over the UTF-8 bytes of the concatenated
user-message text parts followed by the decimal count of image parts,
rendered as 16 hex chars; responses embed the first 8.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AuthError, PayloadTooLarge, ProviderUnavailable
from .model import TaskPhase

API_KEY_ENV = "REPLAY_LLM_API_KEY"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    media_type: str
    image_uri: str | None = None
    image_bytes: bytes | None = None


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user"
    parts: tuple


@dataclass(frozen=True)
class ProviderRequest:
    messages: tuple[Message, ...]
    model_id: str = "default"
    max_output_chars: int = 2000
    temperature: float = 0.7
    # request metadata consumed by the mock provider only; remote ignores it
    tags: tuple[tuple[str, str], ...] = ()

    def tag(self, key: str) -> str:
        for k, v in self.tags:
            if k == key:
                return v
        return ""

    def validate(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("exactly one system message required, first")
        if sum(1 for m in self.messages if m.role == "system") != 1:
            raise ValueError("exactly one system message required")
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("at least one user message required")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of [0, 2]")


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    provider_id: str
    latency_ms: int
    raw_id: str | None = None


def request_content_hash(req: ProviderRequest) -> str:
    """Stable 16-hex-char content hash of the user-visible request parts."""
    text = "".join(
        p.text for m in req.messages if m.role == "user" for p in m.parts if isinstance(p, TextPart)
    )
    n_images = sum(
        1 for m in req.messages if m.role == "user" for p in m.parts if isinstance(p, ImagePart)
    )
    data = text.encode("utf-8") + str(n_images).encode("ascii")
    return f"{fnv1a64(data):016x}"


class MockProvider:
    """Deterministic local provider.

    Classification requests (tag stage=classify) yield "PHASE: <name>"
    where the name is TaskPhase[hash mod 6]. Generation requests yield
    "MOCK[<template>|<phase>|<type>|#xxxxxxxx]".
    """

    provider_id = "mock"

    def complete(self, req: ProviderRequest) -> ProviderResponse:
        req.validate()
        digest = request_content_hash(req)
        if req.tag("stage") == "classify":
            phases = list(TaskPhase)
            phase = phases[int(digest, 16) % len(phases)]
            text = f"PHASE: {phase.value}"
        else:
            text = (
                f"MOCK[{req.tag('template')}|{req.tag('phase')}|{req.tag('type')}|#{digest[:8]}]"
            )
        return ProviderResponse(text=text, provider_id=self.provider_id, latency_ms=0)


class HttpProvider:
    """Chat-completions-style remote endpoint.

    Transient failures (429/5xx, timeouts) are retried up to 3 attempts
    with 1s/2s/4s backoff. 401/403 and 413 are never retried.
    """

    provider_id = "http"
    RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        model_id: str = "",
        api_key: str | None = None,
        timeout_ms: int = 60000,
        media_root: Path | None = None,
        backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0),
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout_ms = timeout_ms
        self.media_root = media_root
        self.backoff_s = backoff_s
        self._sleep = sleep

    def _part_to_json(self, part) -> dict:
        if isinstance(part, TextPart):
            return {"type": "text", "text": part.text}
        data = part.image_bytes
        if data is None and part.image_uri and self.media_root is not None:
            data = (self.media_root / part.image_uri).read_bytes()
        if data is None:
            raise ValueError(f"image part has no bytes and no resolvable uri: {part.image_uri!r}")
        b64 = base64.b64encode(data).decode("ascii")
        return {
            "type": "image_url",
            "image_url": {"url": f"data:{part.media_type};base64,{b64}"},
        }

    def _to_wire(self, req: ProviderRequest) -> dict:
        messages = []
        for m in req.messages:
            if m.role == "system" and all(isinstance(p, TextPart) for p in m.parts):
                messages.append({"role": "system", "content": "".join(p.text for p in m.parts)})
            else:
                messages.append({"role": m.role, "content": [self._part_to_json(p) for p in m.parts]})
        return {
            "model": req.model_id or self.model_id,
            "messages": messages,
            "temperature": req.temperature,
        }

    def complete(self, req: ProviderRequest) -> ProviderResponse:
        import httpx

        req.validate()
        if not self.api_key:
            raise AuthError(f"no API key; set {API_KEY_ENV}")
        body = self._to_wire(req)
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_err: Exception | None = None
        started = time.monotonic()
        for attempt in range(3):
            try:
                resp = httpx.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_ms / 1000.0
                )
            except httpx.TimeoutException as e:
                last_err = e
                if attempt < 2:
                    self._sleep(self.backoff_s[attempt])
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
            if resp.status_code == 413:
                raise PayloadTooLarge("provider rejected request size; tighten the context budget")
            if resp.status_code in self.RETRY_STATUSES:
                last_err = ProviderUnavailable(f"HTTP {resp.status_code}")
                if attempt < 2:
                    self._sleep(self.backoff_s[attempt])
                continue
            resp.raise_for_status()
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            if not text:
                raise ProviderUnavailable("provider returned empty completion")
            latency = int((time.monotonic() - started) * 1000)
            return ProviderResponse(
                text=text, provider_id=self.provider_id, latency_ms=latency, raw_id=data.get("id")
            )
        raise ProviderUnavailable(f"gave up after 3 attempts: {last_err}")


class Gateway:
    """Front door with a per-provider in-flight cap (FIFO via semaphore)."""

    def __init__(self, provider, max_in_flight: int = 4):
        self.provider = provider
        self._sem = threading.Semaphore(max_in_flight)

    @property
    def provider_id(self) -> str:
        return self.provider.provider_id

    def complete(self, req: ProviderRequest) -> ProviderResponse:
        with self._sem:
            return self.provider.complete(req)


def make_gateway(
    provider: str = "mock",
    endpoint: str = "",
    model_id: str = "",
    timeout_ms: int = 60000,
    media_root: Path | None = None,
    max_in_flight: int = 4,
) -> Gateway:
    if provider == "mock":
        return Gateway(MockProvider(), max_in_flight)
    if provider == "http":
        if not endpoint:
            raise ValueError("http provider requires an endpoint URL")
        return Gateway(
            HttpProvider(endpoint, model_id=model_id, timeout_ms=timeout_ms, media_root=media_root),
            max_in_flight,
        )
    raise ValueError(f"unknown provider {provider!r}")
