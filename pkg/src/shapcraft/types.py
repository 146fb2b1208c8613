"""Domain types shared by every other module.

All types here are immutable values; mutation happens by building new
instances. An ExampleSet is ordered on purpose: the prompt built from it
depends on example order, so two sets with the same members in different
orders are different objects of study.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

ORIGINS = ("proposed", "improved", "manual")
TASK_KINDS = ("classification", "generation", "math")

# Default prompt field names per task kind: (input line, target line).
DEFAULT_FIELDS = {
    "classification": ("Sentence", "Label"),
    "generation": ("Text", "Summary"),
    "math": ("Question", "Answer"),
}

Gold = Union[str, tuple]


@dataclass(frozen=True)
class Example:
    """One in-context demonstration: an input and its target answer."""

    id: str
    input_text: str
    target_text: str
    origin: str = "manual"

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("example id must be non-empty")
        if not self.input_text.strip():
            raise ValueError(f"example {self.id!r}: input_text is blank")
        if not self.target_text.strip():
            raise ValueError(f"example {self.id!r}: target_text is blank")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}; expected one of {ORIGINS}")


@dataclass(frozen=True)
class ExampleSet:
    """An ordered, duplicate-free sequence of examples.

    Order is significant: it is the order the examples appear in the
    assembled prompt.
    """

    items: tuple[Example, ...] = ()

    def __post_init__(self) -> None:
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        ids = [e.id for e in items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate example ids: {dupes}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.items)

    def __getitem__(self, index: int) -> Example:
        return self.items[index]

    def ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.items)

    def without(self, index: int) -> "ExampleSet":
        """A new set with the example at `index` removed, order preserved."""
        if not 0 <= index < len(self.items):
            raise IndexError(f"index {index} out of range for set of {len(self.items)}")
        return ExampleSet(self.items[:index] + self.items[index + 1 :])

    def with_appended(self, example: Example) -> "ExampleSet":
        return ExampleSet(self.items + (example,))

    def with_inserted(self, index: int, example: Example) -> "ExampleSet":
        index = max(0, min(index, len(self.items)))
        return ExampleSet(self.items[:index] + (example,) + self.items[index:])


@dataclass(frozen=True)
class TaskSpec:
    """Static description of the task being prompted.

    `instruction` is the hand-written base prompt. Field names control how
    example and query lines are rendered; template overrides replace the
    per-kind default block layouts (named placeholders: {index}, {input},
    {target}, {input_field}, {target_field}).
    """

    instruction: str
    task_kind: str = "classification"
    labels: tuple[str, ...] | None = None
    metric: str = "exact_match"
    input_field: str = ""
    target_field: str = ""
    description: str = ""
    example_template: str | None = None
    query_template: str | None = None

    def __post_init__(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}; expected one of {TASK_KINDS}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        if self.task_kind == "classification":
            if not self.labels:
                raise ValueError("classification tasks need a non-empty label set")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError("label set contains duplicates")
        elif self.labels:
            raise ValueError(f"{self.task_kind} tasks must not define labels")
        defaults = DEFAULT_FIELDS[self.task_kind]
        if not self.input_field:
            object.__setattr__(self, "input_field", defaults[0])
        if not self.target_field:
            object.__setattr__(self, "target_field", defaults[1])


@dataclass(frozen=True)
class DataPoint:
    """A labeled evaluation point: gold is a label string or one-or-more references."""

    id: str
    input: str
    gold: Gold

    def __post_init__(self) -> None:
        if not self.input.strip():
            raise ValueError(f"data point {self.id!r}: input is blank")
        if isinstance(self.gold, str):
            if not self.gold.strip():
                raise ValueError(f"data point {self.id!r}: gold is blank")
        else:
            gold = tuple(self.gold)
            object.__setattr__(self, "gold", gold)
            if not gold or any(not r.strip() for r in gold):
                raise ValueError(f"data point {self.id!r}: gold references missing or blank")

    def references(self) -> tuple[str, ...]:
        """Gold as a tuple of reference strings (singleton for label golds)."""
        return (self.gold,) if isinstance(self.gold, str) else self.gold


@dataclass(frozen=True)
class EvalBatch:
    """The multiset of points a utility score is computed against."""

    points: tuple[DataPoint, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        points = tuple(self.points)
        object.__setattr__(self, "points", points)
        ids = [p.id for p in points]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate data point ids in batch")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DataPoint]:
        return iter(self.points)

    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.points)


def merge_batches(fresh: EvalBatch, extra: Sequence[DataPoint]) -> EvalBatch:
    """Union of a fresh batch with extra points, deduplicated by id.

    Fresh points come first; extra points keep their relative order.
    """
    seen = set(fresh.ids())
    merged = list(fresh.points)
    for point in extra:
        if point.id not in seen:
            merged.append(point)
            seen.add(point.id)
    return EvalBatch(tuple(merged))
