"""Deterministic offline backends for tests and `--mock` runs.

The scripted scenario trio simulates a run where half of the proposed
examples help and half hurt: the evaluator reads the prompt, computes the
fraction g of helpful examples in it, and answers each query correctly with
per-query probability g (realized by a deterministic hash threshold, so the
same prompt and query always give the same answer). Accuracy is therefore
monotone in g and exactly 1.0 once every example is helpful.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .llm import CompletionClient
from .types import Example, TaskSpec

GOOD_MARKER = "(good)"
BAD_MARKER = "(bad)"
POSITIVE_MARKER = "(+)"


class MappingCompleter(CompletionClient):
    """Canned prompt -> response map; unknown prompts raise."""

    def __init__(self, responses: Mapping[str, str], max_concurrency: int = 1):
        super().__init__(max_concurrency=max_concurrency)
        self.responses = dict(responses)

    def _complete(self, prompt: str) -> str:
        if prompt not in self.responses:
            raise KeyError(f"no canned response for prompt starting {prompt[:60]!r}")
        return self.responses[prompt]


class FunctionCompleter(CompletionClient):
    """Completer backed by an arbitrary prompt -> text function."""

    def __init__(self, fn: Callable[[str], str], max_concurrency: int = 1):
        super().__init__(max_concurrency=max_concurrency)
        self._fn = fn

    def _complete(self, prompt: str) -> str:
        return self._fn(prompt)


class SequenceCompleter(CompletionClient):
    """Plays back scripted responses in order, ignoring the prompts."""

    def __init__(self, responses: Sequence[str]):
        super().__init__(max_concurrency=1)
        self._responses = list(responses)
        self._next = 0

    def _rebuild_locks(self) -> None:
        super()._rebuild_locks()
        self._cursor_lock = threading.Lock()

    def _complete(self, prompt: str) -> str:
        with self._cursor_lock:
            if self._next >= len(self._responses):
                raise RuntimeError("scripted responses exhausted")
            response = self._responses[self._next]
            self._next += 1
            return response


def hash_fraction(text: str) -> float:
    """Deterministic value in [0, 1) derived from the text."""
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    return int(digest, 16) / 16**12


def _format_blocks(task: TaskSpec, rows: Sequence[tuple[str, str]]) -> str:
    blocks = [
        f'Example{i}:\n{task.input_field}: "{text}"\n{task.target_field}: {label}'
        for i, (text, label) in enumerate(rows, start=1)
    ]
    return "\n\n".join(blocks)


class ScenarioProposer(CompletionClient):
    """Emits the requested number of examples, alternating helpful/harmful."""

    def __init__(self, task: TaskSpec):
        super().__init__(max_concurrency=1)
        self.task = task

    def _complete(self, prompt: str) -> str:
        match = re.search(r"exactly (\d+) training examples", prompt)
        count = int(match.group(1)) if match else 16
        labels = self.task.labels or ("<text>",)
        rows = []
        for i in range(count):
            marker = GOOD_MARKER if i % 2 == 0 else BAD_MARKER
            quality = "helpful" if i % 2 == 0 else "harmful"
            text = f"scripted {quality} sentence {i:02d} {marker}"
            rows.append((text, labels[i % len(labels)]))
        return _format_blocks(self.task, rows)


class ScenarioImprover(CompletionClient):
    """Always proposes helpful candidates, fresh text per distinct prompt."""

    def __init__(self, task: TaskSpec):
        super().__init__(max_concurrency=1)
        self.task = task

    def _complete(self, prompt: str) -> str:
        match = re.search(r"exactly (\d+) NEW examples", prompt)
        count = int(match.group(1)) if match else 10
        tag = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:6]
        labels = self.task.labels or ("<text>",)
        rows = [
            (f"scripted helpful candidate {tag}-{j:02d} {GOOD_MARKER}", labels[j % len(labels)])
            for j in range(count)
        ]
        return _format_blocks(self.task, rows)


_WEIGHT_RE = re.compile(r"\[w=([0-9.]+)\]")
_PROBE_RE = re.compile(r"probe (\d+) of (\d+)")


class ScenarioEvaluator(CompletionClient):
    """Answers correctly with per-query rate equal to the helpful fraction.

    The query's gold label is `labels[-1]` when the query text carries the
    positive marker and `labels[0]` otherwise, mirroring how the scenario
    dataset is generated.

    When the prompt's examples carry `[w=X]` weight markers and the query is
    a `probe j of N` calibration point, the evaluator instead answers
    correctly iff (j - 0.5)/N < sum of weights, so the induced utility over
    the N probes is exactly additive in the examples present (for weight
    sums that are multiples of 1/N).
    """

    def __init__(self, task: TaskSpec, max_concurrency: int = 1):
        super().__init__(max_concurrency=max_concurrency)
        self.task = task
        self._input_re = re.compile(
            rf"^{re.escape(task.input_field)}: \"(.*)\"$", re.MULTILINE
        )

    def _complete(self, prompt: str) -> str:
        inputs = self._input_re.findall(prompt)
        if not inputs:
            raise ValueError("no input lines found in prompt")
        query, examples = inputs[-1], inputs[:-1]
        probe = _PROBE_RE.search(query)
        weights = [float(w) for text in examples for w in _WEIGHT_RE.findall(text)]
        if probe is not None:
            j, total = int(probe.group(1)), int(probe.group(2))
            correct = (j - 0.5) / total < sum(weights)
        else:
            good = sum(GOOD_MARKER in text for text in examples)
            bad = sum(BAD_MARKER in text for text in examples)
            fraction = good / (good + bad) if good + bad else 0.0
            correct = hash_fraction(query) < fraction
        labels = self.task.labels or ("wrong", "right")
        gold = labels[-1] if POSITIVE_MARKER in query else labels[0]
        other = labels[0] if gold == labels[-1] else labels[-1]
        return gold if correct else other


@dataclass(frozen=True)
class ScenarioBackend:
    proposer: CompletionClient
    improver: CompletionClient
    evaluator: CompletionClient


def scenario_backend(task: TaskSpec, evaluator_concurrency: int = 1) -> ScenarioBackend:
    return ScenarioBackend(
        proposer=ScenarioProposer(task),
        improver=ScenarioImprover(task),
        evaluator=ScenarioEvaluator(task, max_concurrency=evaluator_concurrency),
    )


def weighted_probe_points(count: int, labels: Sequence[str] = ("negative", "positive")) -> list[dict]:
    """Calibration records for the additive weighted-evaluator mode."""
    return [
        {
            "input": f"calibration probe {j} of {count} {POSITIVE_MARKER}",
            "label": labels[-1],
        }
        for j in range(1, count + 1)
    ]


def weighted_example(example_id: str, weight: float, label: str) -> Example:
    return Example(
        id=example_id,
        input_text=f"weighted mock example {example_id} [w={weight}]",
        target_text=label,
        origin="manual",
    )


def scenario_points(count: int, labels: Sequence[str] = ("negative", "positive")) -> list[dict]:
    """Raw records for a toy dataset matching the scenario evaluator's golds.

    Uses the same convention as the evaluator: the last label is the one
    signalled by the positive marker.
    """
    records = []
    for i in range(count):
        positive = i % 2 == 0
        marker = f" {POSITIVE_MARKER}" if positive else ""
        records.append(
            {
                "input": f"scenario query {i:03d}{marker}",
                "label": labels[-1] if positive else labels[0],
            }
        )
    return records
