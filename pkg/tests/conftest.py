from __future__ import annotations

import itertools

import numpy as np
import pytest

from shapcraft import DataPoint, EvalBatch, Example, TaskSpec
from shapcraft.mocks import scenario_points


def make_examples(n: int, prefix: str = "e") -> tuple[Example, ...]:
    return tuple(
        Example(id=f"{prefix}{i}", input_text=f"sample text {i}", target_text="positive")
        for i in range(n)
    )


def random_set_table(n: int, seed: int) -> dict[frozenset, float]:
    """A random order-insensitive utility table over all subsets of range(n)."""
    rng = np.random.default_rng(seed)
    table = {}
    for size in range(n + 1):
        for combo in itertools.combinations(range(n), size):
            table[frozenset(combo)] = float(rng.random())
    return table


def table_value_fn(table: dict[frozenset, float], prefix: str = "e"):
    """Coalition value function reading a set-indexed table by example id."""

    def value_fn(coalition):
        return table[frozenset(int(e.id.removeprefix(prefix)) for e in coalition)]

    return value_fn


@pytest.fixture
def sentiment_task() -> TaskSpec:
    return TaskSpec(
        instruction="Classify the sentence as positive or negative. Answer with the label only.",
        task_kind="classification",
        labels=("negative", "positive"),
        metric="exact_match",
    )


@pytest.fixture
def summary_task() -> TaskSpec:
    return TaskSpec(
        instruction="Condense the text into one short sentence.",
        task_kind="generation",
        metric="rouge_avg",
    )


@pytest.fixture
def math_task() -> TaskSpec:
    return TaskSpec(
        instruction="Solve the problem and give the final number.",
        task_kind="math",
        metric="final_number",
    )


@pytest.fixture
def scenario_dataset() -> tuple[DataPoint, ...]:
    records = scenario_points(120)
    return tuple(
        DataPoint(id=str(i + 1), input=r["input"], gold=r["label"])
        for i, r in enumerate(records)
    )


def batch_of(points) -> EvalBatch:
    return EvalBatch(tuple(points))
