"""Chat-completion backends.

One client per role (proposer, improver, evaluator), each bounded by its own
concurrency limit and tracking how many completions it served. The HTTP
client speaks the open /v1/chat/completions protocol: a single user message
carrying the whole prompt, so mock and live paths see identical inputs.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import requests

logger = logging.getLogger(__name__)

ROLES = ("proposer", "improver", "evaluator")

DEFAULT_TEMPERATURES = {"proposer": 0.7, "improver": 0.7, "evaluator": 0.0}
DEFAULT_MAX_TOKENS = {"proposer": 2048, "improver": 2048, "evaluator": 256}


class TransportError(RuntimeError):
    """Request still failing after all retries."""


class EndpointError(RuntimeError):
    """Non-retryable client-side failure (bad URL, bad key, 4xx)."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 60.0
    retries: int = 3
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


_LOCK_TYPES = (type(threading.Lock()), type(threading.BoundedSemaphore()))


class CompletionClient:
    """Base class: bounded concurrency, call counting, ordered batch helper."""

    def __init__(self, max_concurrency: int = 4):
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        self.max_concurrency = max_concurrency
        self.call_count = 0
        self._rebuild_locks()

    def _rebuild_locks(self) -> None:
        self._slots = threading.BoundedSemaphore(self.max_concurrency)
        self._count_lock = threading.Lock()

    # locks are dropped and rebuilt so clients survive pickling/deepcopy
    # (e.g. sklearn.clone of an estimator holding them)
    def __getstate__(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if not isinstance(v, _LOCK_TYPES)}

    def __setstate__(self, state: dict) -> None:
        self.__dict__.update(state)
        self._rebuild_locks()

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        with self._slots:
            with self._count_lock:
                self.call_count += 1
            return self._complete(prompt)

    def complete_many(self, prompts: Sequence[str]) -> list[str]:
        """Completions for each prompt, in prompt order."""
        if not prompts:
            return []
        if self.max_concurrency == 1 or len(prompts) == 1:
            return [self.complete(p) for p in prompts]
        workers = min(self.max_concurrency, len(prompts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.complete, prompts))

    def _complete(self, prompt: str) -> str:
        raise NotImplementedError


class ChatCompletionsClient(CompletionClient):
    """HTTP client for any endpoint serving POST {base_url}/v1/chat/completions.

    Transport failures and 5xx responses are retried with exponential
    backoff up to the configured budget; 4xx responses fail immediately as
    configuration errors. The API key is read from the configured
    environment variable at request time.
    """

    def __init__(
        self,
        config: EndpointConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff: float = 0.5,
    ):
        super().__init__(max_concurrency=config.max_concurrency)
        self.config = config
        self._session = session or requests.Session()
        self._sleep = sleep
        self._backoff = backoff

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/v1/chat/completions"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        attempts = self.config.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt > 0:
                self._sleep(self._backoff * 2 ** (attempt - 1))
                logger.info("retrying %s (attempt %d/%d)", url, attempt + 1, attempts)
            try:
                response = self._session.post(
                    url, json=body, headers=self._headers(), timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            status = response.status_code
            if 400 <= status < 500:
                raise EndpointError(f"{url} answered {status}: {_snippet(response)}")
            if status >= 500:
                last_error = TransportError(f"{url} answered {status}")
                continue
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = TransportError(f"malformed completion payload: {exc}")
                continue
        raise TransportError(f"{url} failed after {attempts} attempts: {last_error}")


def _snippet(response: requests.Response) -> str:
    try:
        return response.text[:200]
    except Exception:
        return "<unreadable body>"


def endpoint_defaults(role: str) -> tuple[float, int]:
    """(temperature, max_tokens) defaults for a role."""
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
    return DEFAULT_TEMPERATURES[role], DEFAULT_MAX_TOKENS[role]
