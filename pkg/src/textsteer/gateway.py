"""Uniform access to chat-completion providers.

Three modes:
  live    - requests go to the provider over HTTP
  record  - live, plus every response is persisted to the fixture store
  replay  - responses come only from the fixture store; a miss is an error

Fixtures make every agentic behavior a pure function of its requests, which
is what the replay-determinism tests rely on.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ExtractionError, FixtureMissError, GatewayError

DEFAULT_MAX_PARALLEL = 16
RETRY_BACKOFF = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class ModelRef:
    provider: str
    model: str
    endpoint: str = ""
    api_key_env: str = ""
    # USD per 1K tokens
    prompt_rate: float = 0.0
    completion_rate: float = 0.0

    @property
    def name(self):
        return f"{self.provider}/{self.model}"


@dataclass(frozen=True)
class CompletionRequest:
    model: ModelRef
    system: str
    user: str
    temperature: float = 0.0
    max_tokens: int = 2048
    tag: str = ""

    def payload(self) -> dict:
        return {"model": self.model.name, "system": self.system, "user": self.user,
                "temperature": self.temperature, "max_tokens": self.max_tokens}

    def digest(self) -> str:
        body = json.dumps({"tag": self.tag, **self.payload()},
                          sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass
class CompletionResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0
    cost_estimate: float = 0.0

    def to_dict(self):
        return {"text": self.text, "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens, "latency": self.latency,
                "cost_estimate": self.cost_estimate}

    @classmethod
    def from_dict(cls, d):
        return cls(text=d.get("text", ""), prompt_tokens=int(d.get("prompt_tokens", 0)),
                   completion_tokens=int(d.get("completion_tokens", 0)),
                   latency=float(d.get("latency", 0.0)),
                   cost_estimate=float(d.get("cost_estimate", 0.0)))


class FixtureStore:
    """Recorded responses keyed by request digest, persisted as JSON lines."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._records: dict[str, list[dict]] = {}
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._records.setdefault(entry["hash"], []).append(entry)

    def record(self, request: CompletionRequest, response: CompletionResponse):
        entry = {"hash": request.digest(), "tag": request.tag,
                 "request": request.payload(), "response": response.to_dict()}
        with self._lock:
            self._records.setdefault(entry["hash"], []).append(entry)
            if self.path:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")

    def lookup(self, request: CompletionRequest) -> CompletionResponse:
        digest = request.digest()
        with self._lock:
            entries = self._records.get(digest)
            if not entries:
                raise FixtureMissError(request.tag, digest)
            cursor = self._cursors.get(digest, 0)
            # identical re-issues of one call site replay in recorded order;
            # the last recording answers any surplus
            entry = entries[min(cursor, len(entries) - 1)]
            self._cursors[digest] = cursor + 1
        return CompletionResponse.from_dict(entry["response"])

    def reset_cursors(self):
        with self._lock:
            self._cursors.clear()

    def __len__(self):
        return sum(len(v) for v in self._records.values())


class HttpTransport:
    """OpenAI-style chat-completions transport."""

    def __init__(self, timeout=60.0):
        import httpx

        self._client = httpx.Client(timeout=timeout)

    def __call__(self, request: CompletionRequest) -> CompletionResponse:
        import os

        key = os.environ.get(request.model.api_key_env, "")
        if not key:
            raise GatewayError(
                f"api key env {request.model.api_key_env!r} not set for {request.model.name}")
        url = request.model.endpoint or "https://api.openai.com/v1/chat/completions"
        body = {"model": request.model.model,
                "messages": [{"role": "system", "content": request.system},
                             {"role": "user", "content": request.user}],
                "temperature": request.temperature, "max_tokens": request.max_tokens}
        start = time.monotonic()
        resp = self._client.post(url, json=body, headers={"Authorization": f"Bearer {key}"})
        if resp.status_code == 429:
            raise RetryableError(f"rate limited: {resp.text[:200]}")
        if resp.status_code >= 500:
            raise RetryableError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise GatewayError(f"provider error {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        usage = data.get("usage", {})
        return CompletionResponse(
            text=data["choices"][0]["message"]["content"],
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
            latency=time.monotonic() - start)


class RetryableError(GatewayError):
    """Transport failure worth retrying (timeouts, 429, 5xx)."""


@dataclass
class GatewayStats:
    calls_by_category: dict = field(default_factory=dict)
    total_cost: float = 0.0
    in_flight: int = 0
    max_in_flight: int = 0


class Gateway:
    """Batching, committee fanout, and record/replay over a transport."""

    def __init__(self, transport=None, mode="replay", fixtures: FixtureStore | None = None,
                 max_parallel=DEFAULT_MAX_PARALLEL, retries=3, backoff=RETRY_BACKOFF,
                 sleep=time.sleep):
        if mode not in ("live", "record", "replay"):
            raise GatewayError(f"unknown mode {mode!r}")
        if mode in ("live", "record") and transport is None:
            raise GatewayError(f"mode {mode!r} requires a transport")
        self.transport = transport
        self.mode = mode
        self.fixtures = fixtures if fixtures is not None else FixtureStore()
        self.max_parallel = max(1, int(max_parallel))
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self.stats = GatewayStats()
        self._lock = threading.Lock()

    # -- instrumentation ----------------------------------------------------

    def _count(self, tag):
        category = tag.split("/", 1)[0] if tag else "untagged"
        with self._lock:
            self.stats.calls_by_category[category] = \
                self.stats.calls_by_category.get(category, 0) + 1

    def _enter(self):
        with self._lock:
            self.stats.in_flight += 1
            self.stats.max_in_flight = max(self.stats.max_in_flight, self.stats.in_flight)

    def _exit(self):
        with self._lock:
            self.stats.in_flight -= 1

    def reset_stats(self):
        self.stats = GatewayStats()

    # -- core ---------------------------------------------------------------

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self._count(request.tag)
        self._enter()
        try:
            if self.mode == "replay":
                response = self.fixtures.lookup(request)
            else:
                response = self._call_with_retries(request)
                response.cost_estimate = (
                    request.model.prompt_rate * response.prompt_tokens
                    + request.model.completion_rate * response.completion_tokens) / 1000.0
                if self.mode == "record":
                    self.fixtures.record(request, response)
            with self._lock:
                self.stats.total_cost += response.cost_estimate
            return response
        finally:
            self._exit()

    def _call_with_retries(self, request):
        last = None
        for attempt in range(self.retries):
            try:
                return self.transport(request)
            except RetryableError as exc:
                last = exc
                if attempt < self.retries - 1:
                    self._sleep(self.backoff[min(attempt, len(self.backoff) - 1)])
        raise GatewayError(f"transport failed after {self.retries} attempts: {last}")

    def complete_batch(self, requests, max_parallel=None):
        """Run requests with bounded parallelism; results keep input order.

        Per-item failures are returned positionally as exception objects; the
        batch never aborts siblings.
        """
        workers = max(1, int(max_parallel if max_parallel is not None else self.max_parallel))
        results = [None] * len(requests)

        def run(i, req):
            try:
                results[i] = self.complete(req)
            except Exception as exc:  # noqa: BLE001 - reported positionally
                results[i] = exc

        if workers == 1 or len(requests) <= 1:
            for i, req in enumerate(requests):
                run(i, req)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda arg: run(*arg), enumerate(requests)))
        return results

    def committee_complete(self, system, user, committee, tag="committee",
                           temperature=0.0, max_tokens=2048):
        """One response per committee member, in committee order."""
        if not committee:
            raise GatewayError("committee is empty")
        requests = [CompletionRequest(model=m, system=system, user=user,
                                      temperature=temperature, max_tokens=max_tokens,
                                      tag=f"{tag}/{m.name}")
                    for m in committee]
        return self.complete_batch(requests)


# ---------------------------------------------------------------------------
# structured-output extraction

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(text: str):
    """Parse the first JSON object/array in possibly-fenced, prose-wrapped text."""
    if text is None:
        raise ExtractionError("no text to extract JSON from")
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)] + [text]
    decoder = json.JSONDecoder()
    for candidate in candidates:
        stripped = candidate.strip()
        for start_char in ("{", "["):
            idx = stripped.find(start_char)
            while idx != -1:
                try:
                    value, _ = decoder.raw_decode(stripped[idx:])
                    return value
                except json.JSONDecodeError:
                    idx = stripped.find(start_char, idx + 1)
    raise ExtractionError(f"no JSON found in response: {text[:120]!r}")


def extract_tagged(text: str, tag: str, vocabulary=None) -> str:
    """Return the content of <TAG>...</TAG>; optionally enforce a vocabulary."""
    matches = re.findall(rf"<{tag}>(.*?)</{tag}>", text or "", re.DOTALL)
    if not matches:
        raise ExtractionError(f"missing <{tag}> block in response")
    if len(matches) > 1:
        raise ExtractionError(f"duplicated <{tag}> block in response")
    inner = matches[0].strip()
    if vocabulary is not None and inner not in vocabulary:
        raise ExtractionError(
            f"<{tag}> content {inner!r} not in allowed set {sorted(vocabulary)}")
    return inner
