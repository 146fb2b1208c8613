"""Per-example value attribution over ordered coalitions.

Both the Monte-Carlo estimator and the exact enumerator walk permutations by
prefix: starting from the empty coalition, examples are added in permutation
order and each example is credited with the utility delta at its insertion.
Coalition values are memoized per call, so one estimation run costs at most
P*n + 1 distinct evaluations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .types import Example
from .utility import ValueFn

EXACT_SIZE_LIMIT = 8

RngLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class ShapleyEstimate:
    """Estimated per-example values with their sampled marginal contributions.

    values[i] is the arithmetic mean of contributions[i] (0.0 when no
    contribution was sampled); indices align with the example sequence the
    estimate was computed for.
    """

    values: tuple[float, ...]
    contributions: tuple[tuple[float, ...], ...]
    permutations_used: int

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "contributions": [list(c) for c in self.contributions],
            "permutations_used": self.permutations_used,
        }


def _as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class _MemoizedValue:
    """Per-run coalition memo keyed by the ordered tuple of example ids."""

    def __init__(self, value_fn: ValueFn):
        self._value_fn = value_fn
        self._seen: dict[tuple[str, ...], float] = {}

    def __call__(self, coalition: tuple[Example, ...]) -> float:
        key = tuple(e.id for e in coalition)
        if key not in self._seen:
            self._seen[key] = self._value_fn(coalition)
        return self._seen[key]


def _walk(
    items: tuple[Example, ...],
    order: Sequence[int],
    value_of: _MemoizedValue,
    empty_value: float,
) -> list[tuple[int, float]]:
    """Marginal contribution of each example along one permutation prefix walk."""
    deltas = []
    prefix: list[Example] = []
    previous = empty_value
    for index in order:
        prefix.append(items[index])
        current = value_of(tuple(prefix))
        deltas.append((index, current - previous))
        previous = current
    return deltas


def mc_shapley(
    examples: Sequence[Example],
    value_fn: ValueFn,
    n_permutations: int,
    rng: RngLike = None,
) -> ShapleyEstimate:
    """Monte-Carlo Shapley estimate from uniform random permutations.

    Each permutation index gets its own RNG substream, so the sampled
    permutations (and therefore the estimate) are bit-identical no matter
    how coalition evaluations are parallelized underneath.
    """
    items = tuple(examples)
    if not items:
        raise ValueError("need at least one example")
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    value_of = _MemoizedValue(value_fn)
    empty_value = value_of(())
    contributions: list[list[float]] = [[] for _ in items]
    streams = _as_generator(rng).spawn(n_permutations)
    for stream in streams:
        order = stream.permutation(len(items))
        for index, delta in _walk(items, order, value_of, empty_value):
            contributions[index].append(delta)
    values = tuple(sum(c) / len(c) if c else 0.0 for c in contributions)
    return ShapleyEstimate(
        values=values,
        contributions=tuple(tuple(c) for c in contributions),
        permutations_used=n_permutations,
    )


def exact_shapley(examples: Sequence[Example], value_fn: ValueFn) -> tuple[float, ...]:
    """Exact values: marginal contributions averaged over all n! permutations."""
    items = tuple(examples)
    n = len(items)
    if not items:
        raise ValueError("need at least one example")
    if n > EXACT_SIZE_LIMIT:
        raise ValueError(
            f"exact enumeration refused for {n} examples (limit {EXACT_SIZE_LIMIT})"
        )
    value_of = _MemoizedValue(value_fn)
    empty_value = value_of(())
    # int zeros keep the accumulation exact when value_fn yields rationals
    sums: list = [0] * n
    for order in itertools.permutations(range(n)):
        for index, delta in _walk(items, order, value_of, empty_value):
            sums[index] += delta
    count = math.factorial(n)
    return tuple(s / count for s in sums)


def worst_index(estimate: Union[ShapleyEstimate, Sequence[float]]) -> int:
    """Index of the smallest value; ties go to the lowest index."""
    values = estimate.values if isinstance(estimate, ShapleyEstimate) else tuple(estimate)
    if not values:
        raise ValueError("no values to rank")
    return int(np.argmin(values))


def loo_worst_index(examples: Sequence[Example], value_fn: ValueFn) -> int:
    """Leave-one-out selector: index whose removal leaves the highest utility.

    Ties go to the lowest index.
    """
    items = tuple(examples)
    if not items:
        raise ValueError("need at least one example")
    scores = [
        value_fn(items[:i] + items[i + 1 :]) for i in range(len(items))
    ]
    return int(np.argmax(scores))
