"""Client contract for the external language-model service.

Two entry points only: ``complete(prompt)`` returns generated text and
``score(prompt, completions)`` returns one log-likelihood per candidate
completion. ``HttpLlmClient`` talks JSON over HTTP; ``StubLlmClient`` is a
deterministic offline stand-in for tests and the bundled pipeline.

Wire format (both requests go to the configured endpoint URL)::

    POST {"prompt": str, "completions": [str]}  ->  {"log_likelihoods": [float]}
    POST {"prompt": str}                          ->  {"completion": str}
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import socket
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import ProtocolError, TransportError

ENDPOINT_ENV = "WEARLAB_LLM_ENDPOINT"


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    initial_backoff: float = 0.5
    multiplier: float = 2.0
    max_backoff: float = 8.0

    def delays(self) -> list[float]:
        """Sleep before each retry (``attempts - 1`` values)."""
        out, delay = [], self.initial_backoff
        for _ in range(max(0, self.attempts - 1)):
            out.append(min(delay, self.max_backoff))
            delay *= self.multiplier
        return out


class LlmClient(ABC):
    @abstractmethod
    def complete(self, prompt: str) -> str: ...

    @abstractmethod
    def score(self, prompt: str, completions: Sequence[str]) -> list[float]: ...


def llm_score(client: LlmClient, prompt: str, completions: Sequence[str]) -> list[float]:
    """Log-likelihood of each completion given the prompt, validated."""
    if not completions:
        raise ProtocolError("at least one completion is required")
    scores = [float(s) for s in client.score(prompt, list(completions))]
    if len(scores) != len(completions):
        raise ProtocolError(f"expected {len(completions)} log-likelihoods, got {len(scores)}")
    if not all(math.isfinite(s) for s in scores):
        raise ProtocolError(f"non-finite log-likelihood in {scores}")
    return scores


class StubLlmClient(LlmClient):
    """Deterministic offline client.

    Each completion scores ``-(1 + u)`` where ``u`` in [0, 1) comes from a
    SHA-256 digest of (seed, prompt, completion). ``bias`` is added to the
    score of ``favored``; any bias of at least 1 therefore guarantees the
    favored completion outranks every other one on every prompt.
    """

    def __init__(self, seed: int = 0, favored: str | None = None, bias: float = 0.0) -> None:
        self.seed = int(seed)
        self.favored = favored
        self.bias = float(bias)

    def _unit(self, *parts: str) -> float:
        h = hashlib.sha256("\x1f".join((str(self.seed), *parts)).encode("utf-8")).digest()
        return int.from_bytes(h[:8], "big") / 2.0**64

    def score(self, prompt: str, completions: Sequence[str]) -> list[float]:
        if not completions:
            raise ProtocolError("at least one completion is required")
        return [-(1.0 + self._unit(prompt, c)) + (self.bias if c == self.favored else 0.0)
                for c in completions]

    def complete(self, prompt: str) -> str:
        return f"stub completion {int(self._unit(prompt, '') * 1e8):08d}"


class HttpLlmClient(LlmClient):
    """JSON-over-HTTP client with per-call timeout and exponential backoff.

    Connection failures, timeouts and 5xx responses are retried; after the
    policy is exhausted a :class:`TransportError` is raised. Malformed
    responses and 4xx statuses raise :class:`ProtocolError` immediately.
    """

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0,
                 retry: RetryPolicy = RetryPolicy(),
                 sleep: Callable[[float], None] = time.sleep) -> None:
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ProtocolError(f"no endpoint given and {ENDPOINT_ENV} is unset")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retry = retry
        self._sleep = sleep

    def _post(self, payload: dict) -> dict:
        data = json.dumps(payload).encode("utf-8")
        last: Exception | None = None
        for attempt, delay in enumerate([0.0, *self.retry.delays()]):
            if attempt:
                self._sleep(delay)
            req = urllib.request.Request(self.endpoint, data=data, method="POST",
                                         headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = resp.read()
            except urllib.error.HTTPError as exc:
                if exc.code < 500:
                    raise ProtocolError(f"HTTP {exc.code} from {self.endpoint}") from exc
                last = exc
                continue
            except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
                last = exc
                continue
            try:
                doc = json.loads(body)
            except ValueError as exc:
                raise ProtocolError(f"response is not JSON: {body[:80]!r}") from exc
            if not isinstance(doc, dict):
                raise ProtocolError("response is not a JSON object")
            return doc
        raise TransportError(f"{self.endpoint} unreachable after {self.retry.attempts} attempts: {last}")

    def score(self, prompt: str, completions: Sequence[str]) -> list[float]:
        doc = self._post({"prompt": prompt, "completions": list(completions)})
        values = doc.get("log_likelihoods")
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
            raise ProtocolError("response lacks a numeric 'log_likelihoods' list")
        return [float(v) for v in values]

    def complete(self, prompt: str) -> str:
        doc = self._post({"prompt": prompt})
        text = doc.get("completion")
        if not isinstance(text, str):
            raise ProtocolError("response lacks a string 'completion'")
        return text
