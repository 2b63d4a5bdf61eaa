"""HTTP clients for the two external services the pipeline calls: a
chat-completion endpoint with image input and a single-class detector,
plus scripted test doubles that satisfy the same contracts.

Retry policy is pinned (not per-call configurable) so benchmark runs
stay comparable: transient transport errors, timeouts, 429 and 5xx are
retried with exponential backoff (base 1 s, factor 2, jitter) up to
``max_retries`` extra attempts.

Setting the ``DIAGRAMNET_CACHE_DIR`` environment variable (or passing
``cache_dir``) enables an on-disk response cache keyed by a hash of the
completion-relevant config fields plus the full turn.
"""

from __future__ import annotations

import base64
import difflib
import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from .model import BBox

log = logging.getLogger(__name__)

CACHE_ENV = "DIAGRAMNET_CACHE_DIR"
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class ClientError(Exception):
    pass


class TransportError(ClientError):
    """Retry budget exhausted on transient failures."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class RequestTimeout(TransportError):
    pass


class RequestError(ClientError):
    """Non-retryable 4xx; carries the server's message."""

    def __init__(self, status: int, message: str):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status


class ProtocolError(ClientError):
    """Response did not match the wire contract."""


class ScriptMiss(ClientError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_id: str
    adapter_id: str | None = None
    api_key_env: str | None = None
    temperature: float = 0.0
    top_p: float = 0.9
    timeout_s: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    conf_floor: float = 0.25

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")
        if not (0 <= self.max_retries <= 10):
            raise ValueError("max_retries must be in 0..10")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if not (0.0 <= self.conf_floor <= 1.0):
            raise ValueError("conf_floor must be in [0, 1]")

    @property
    def wire_model(self) -> str:
        # Adapter routing rides on the model id: "model:adapter".
        return f"{self.model_id}:{self.adapter_id}" if self.adapter_id else self.model_id


@dataclass(frozen=True)
class ChatTurn:
    system: str
    user_text: str
    images: tuple[tuple[str, str], ...] = ()  # (media type, base64 payload)

    def __post_init__(self):
        if len(self.images) > 4:
            raise ValueError("a turn carries at most 4 images")
        for media, payload in self.images:
            try:
                decoded = base64.b64decode(payload, validate=True)
            except Exception as exc:
                raise ValueError(f"image payload is not valid base64: {exc}") from exc
            if not decoded:
                raise ValueError("image payload decodes to zero bytes")
            if not media:
                raise ValueError("image media type is empty")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Mapping[str, int]
    attempts: int
    cache_hit: bool = False


def turn_fingerprint(turn: ChatTurn) -> str:
    """Stable identity of a turn: sha256 over system/user text and image digests."""
    payload = {
        "system": turn.system,
        "user_text": turn.user_text,
        "images": [
            [media, hashlib.sha256(base64.b64decode(b64)).hexdigest()]
            for media, b64 in turn.images
        ],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _resolve_cache_dir(cache_dir: str | Path | None) -> Path | None:
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else None


class _Cache:
    def __init__(self, root: Path, namespace: str):
        self.dir = root / namespace
        self.dir.mkdir(parents=True, exist_ok=True)

    def get(self, key: str) -> dict | None:
        path = self.dir / f"{key}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, value: dict) -> None:
        path = self.dir / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(value, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)


class _ConcurrencyGauge:
    """Semaphore plus a high-water mark, observable from tests."""

    def __init__(self, limit: int):
        self._sem = threading.Semaphore(limit)
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def __enter__(self):
        self._sem.acquire()
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        return self

    def __exit__(self, *exc):
        with self._lock:
            self.in_flight -= 1
        self._sem.release()
        return False


def _retry_loop(cfg: EndpointConfig, attempt_fn: Callable[[], requests.Response],
                sleeper: Callable[[float], None]) -> tuple[requests.Response, int]:
    attempts = 0
    last_reason = ""
    timed_out = False
    while attempts <= cfg.max_retries:
        attempts += 1
        try:
            resp = attempt_fn()
        except requests.Timeout as exc:
            last_reason, timed_out = f"timeout: {exc}", True
        except requests.RequestException as exc:
            last_reason, timed_out = f"transport failure: {exc}", False
        else:
            if resp.status_code == 200:
                return resp, attempts
            if resp.status_code in RETRYABLE_STATUS:
                last_reason, timed_out = f"HTTP {resp.status_code}", False
            else:
                raise RequestError(resp.status_code, resp.text.strip()[:500])
        if attempts <= cfg.max_retries:
            backoff = BACKOFF_BASE_S * (BACKOFF_FACTOR ** (attempts - 1))
            sleeper(backoff + random.uniform(0, 0.1 * backoff))
    if timed_out:
        raise RequestTimeout(last_reason, attempts)
    raise TransportError(last_reason, attempts)


def _api_headers(cfg: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if cfg.api_key_env:
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise ClientError(f"api key environment variable {cfg.api_key_env!r} is not set")
        headers["Authorization"] = f"Bearer {key}"
    return headers


class HttpChatClient:
    """Chat-completions client (messages with text and image-data parts)."""

    def __init__(self, cfg: EndpointConfig, cache_dir: str | Path | None = None,
                 sleeper: Callable[[float], None] = time.sleep,
                 session: requests.Session | None = None):
        self.cfg = cfg
        self.gauge = _ConcurrencyGauge(cfg.max_concurrency)
        self._sleeper = sleeper
        self._session = session or requests.Session()
        root = _resolve_cache_dir(cache_dir)
        self._cache = _Cache(root, "chat") if root else None

    def describe(self) -> str:
        return f"chat:{self.cfg.wire_model}@{self.cfg.base_url}"

    def _cache_key(self, turn: ChatTurn) -> str:
        relevant = {
            "model_id": self.cfg.model_id,
            "adapter_id": self.cfg.adapter_id,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "turn": {
                "system": turn.system,
                "user_text": turn.user_text,
                "images": list(turn.images),
            },
        }
        return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()

    def complete(self, turn: ChatTurn) -> CompletionResult:
        if self._cache is not None:
            key = self._cache_key(turn)
            hit = self._cache.get(key)
            if hit is not None:
                return CompletionResult(text=hit["text"], usage=hit.get("usage", {}),
                                        attempts=0, cache_hit=True)

        content: list[dict] = [{"type": "text", "text": turn.user_text}]
        for media, payload in turn.images:
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:{media};base64,{payload}"},
            })
        body = {
            "model": self.cfg.wire_model,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "messages": [
                {"role": "system", "content": turn.system},
                {"role": "user", "content": content},
            ],
        }
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        headers = _api_headers(self.cfg)

        with self.gauge:
            resp, attempts = _retry_loop(
                self.cfg,
                lambda: self._session.post(url, json=body, headers=headers,
                                           timeout=self.cfg.timeout_s),
                self._sleeper,
            )
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"chat response missing choices[0].message.content: {exc}")
        usage = data.get("usage", {})
        if self._cache is not None:
            self._cache.put(key, {"text": text, "usage": usage})
        return CompletionResult(text=text, usage=usage, attempts=attempts)


class ScriptedChatClient:
    """Deterministic stand-in: replies looked up by turn fingerprint."""

    def __init__(self, script: Mapping[str, str], default: str | None = None,
                 strict: bool = False, model_id: str = "scripted"):
        self.script = dict(script)
        self.default = default
        self.strict = strict
        self.model_id = model_id
        self.calls = 0

    def describe(self) -> str:
        return f"scripted:{self.model_id}"

    def complete(self, turn: ChatTurn) -> CompletionResult:
        self.calls += 1
        fp = turn_fingerprint(turn)
        if fp in self.script:
            return CompletionResult(text=self.script[fp], usage={}, attempts=1)
        if self.strict or self.default is None:
            near = difflib.get_close_matches(fp, self.script.keys(), n=3, cutoff=0.0)
            raise ScriptMiss(
                f"no scripted reply for fingerprint {fp} "
                f"(user text {turn.user_text[:60]!r}...); nearest: {near}"
            )
        return CompletionResult(text=self.default, usage={}, attempts=1)


def _normalize_boxes(data: dict, conf_floor: float) -> list[tuple[BBox, float]]:
    for key in ("width", "height", "boxes"):
        if key not in data:
            raise ProtocolError(f"detector response missing field: {key}")
    width, height = float(data["width"]), float(data["height"])
    if width <= 0 or height <= 0:
        raise ProtocolError("detector response has non-positive image dimensions")
    out = []
    for i, raw in enumerate(data["boxes"]):
        for key in ("x", "y", "w", "h", "conf"):
            if key not in raw:
                raise ProtocolError(f"detector response missing field: boxes[{i}].{key}")
        conf = float(raw["conf"])
        if conf < conf_floor:
            continue
        x = float(raw["x"]) / width
        y = float(raw["y"]) / height
        w = float(raw["w"]) / width
        h = float(raw["h"]) / height
        cx = min(max(x, 0.0), 1.0)
        cy = min(max(y, 0.0), 1.0)
        cw = min(w - (cx - x), 1.0 - cx)
        ch = min(h - (cy - y), 1.0 - cy)
        if (cx, cy, cw, ch) != (x, y, w, h):
            log.warning("detector box %d clamped into the unit square", i)
        if cw <= 0 or ch <= 0:
            log.warning("detector box %d degenerate after clamping; dropped", i)
            continue
        out.append((BBox(cx, cy, cw, ch), min(max(conf, 0.0), 1.0)))
    out.sort(key=lambda t: (-t[1], t[0].x, t[0].y))
    return out


class HttpDetector:
    """Client side of the detector wire contract: POST /detect with a raw
    image body, JSON reply {width, height, boxes: [{x, y, w, h, conf}]}
    in pixel units. Output boxes are normalized, floored, and sorted by
    confidence descending."""

    def __init__(self, cfg: EndpointConfig, sleeper: Callable[[float], None] = time.sleep,
                 session: requests.Session | None = None):
        self.cfg = cfg
        self.gauge = _ConcurrencyGauge(cfg.max_concurrency)
        self._sleeper = sleeper
        self._session = session or requests.Session()

    def describe(self) -> str:
        return f"detector@{self.cfg.base_url}"

    def detect(self, image: bytes) -> list[tuple[BBox, float]]:
        if not image:
            raise ValueError("detect requires non-empty image bytes")
        url = self.cfg.base_url.rstrip("/") + "/detect"
        headers = {"Content-Type": "application/octet-stream"}
        if self.cfg.api_key_env:
            headers.update(_api_headers(self.cfg))
            headers["Content-Type"] = "application/octet-stream"
        with self.gauge:
            resp, _ = _retry_loop(
                self.cfg,
                lambda: self._session.post(url, data=image, headers=headers,
                                           timeout=self.cfg.timeout_s),
                self._sleeper,
            )
        try:
            data = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"detector response is not JSON: {exc}")
        return _normalize_boxes(data, self.cfg.conf_floor)


class ScriptedDetector:
    """Detector double returning canned normalized boxes per diagram id."""

    def __init__(self, boxes_by_id: Mapping[str, Sequence[tuple[BBox, float]]],
                 fail_ids: Sequence[str] = ()):
        self.boxes_by_id = {k: list(v) for k, v in boxes_by_id.items()}
        self.fail_ids = set(fail_ids)

    def describe(self) -> str:
        return "scripted:detector"

    def boxes_for(self, diagram_id: str) -> list[tuple[BBox, float]]:
        if diagram_id in self.fail_ids:
            raise TransportError(f"scripted detector failure for {diagram_id}", attempts=1)
        return list(self.boxes_by_id.get(diagram_id, []))
