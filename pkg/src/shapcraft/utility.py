"""The set-utility function v(S): mean per-point metric score under the prompt
built from coalition S, memoized across calls.

Cache keys combine the coalition's example ids with an order-insensitive
fingerprint of the batch, so a reshuffled identical batch still hits. In the
default "ordered" mode two coalitions with the same members in different
orders get distinct keys (prompt order matters); "unordered" mode collapses
them, trading fidelity for fewer evaluations.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

from .metrics import metric_scale, score_prediction
from .prompting import assemble_prompt
from .types import EvalBatch, Example, TaskSpec

KEY_MODES = ("ordered", "unordered")

CoalitionKey = tuple
ValueFn = Callable[[Sequence[Example]], float]


class Completer(Protocol):
    def complete(self, prompt: str) -> str: ...

    def complete_many(self, prompts: Sequence[str]) -> list[str]: ...


def batch_fingerprint(batch: EvalBatch) -> str:
    """Order-insensitive digest of the batch's point ids."""
    joined = "\x1f".join(sorted(batch.ids()))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


@dataclass
class UtilityCache:
    """Linearizable memo from (coalition, batch) keys to utility scores."""

    key_mode: str = "ordered"
    hits: int = 0
    misses: int = 0
    _entries: dict[CoalitionKey, float] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if self.key_mode not in KEY_MODES:
            raise ValueError(f"key_mode must be one of {KEY_MODES}")

    def key_for(self, examples: Iterable[Example], batch: EvalBatch) -> CoalitionKey:
        ids = tuple(e.id for e in examples)
        if self.key_mode == "unordered":
            ids = tuple(sorted(ids))
        return (ids, batch_fingerprint(batch))

    def get(self, key: CoalitionKey) -> float | None:
        with self._lock:
            if key in self._entries:
                self.hits += 1
                return self._entries[key]
            self.misses += 1
            return None

    def put(self, key: CoalitionKey, score: float) -> None:
        with self._lock:
            self._entries[key] = score

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def utility(
    examples: Sequence[Example],
    batch: EvalBatch,
    evaluator: Completer,
    task: TaskSpec,
    cache: UtilityCache | None = None,
) -> float:
    """Mean per-point metric score of the evaluator under the coalition's prompt.

    The empty coalition is legal and scores instruction-only (zero-shot)
    prompting. Unparseable predictions are scored by the metric, not raised.
    """
    if len(batch) == 0:
        raise ValueError("utility needs a non-empty batch")
    key = None
    if cache is not None:
        key = cache.key_for(examples, batch)
        cached = cache.get(key)
        if cached is not None:
            return cached
    prompts = [assemble_prompt(task, examples, point.input) for point in batch]
    predictions = evaluator.complete_many(prompts)
    scale = metric_scale(task.metric)
    total = 0.0
    for point, prediction in zip(batch, predictions):
        total += score_prediction(task.metric, prediction, point, task) / scale
    score = total / len(batch)
    if cache is not None and key is not None:
        cache.put(key, score)
    return score


def make_value_fn(
    batch: EvalBatch,
    evaluator: Completer,
    task: TaskSpec,
    cache: UtilityCache | None = None,
) -> ValueFn:
    """Bind batch/evaluator/task/cache into a coalition -> score function."""

    def value_fn(examples: Sequence[Example]) -> float:
        return utility(examples, batch, evaluator, task, cache)

    return value_fn
