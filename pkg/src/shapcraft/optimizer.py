"""The iterative crafting loop.

Each iteration scores the current example set on a fresh subsample merged
with the replay buffer, locates the least valuable example, and replaces,
drops or keeps it so the adopted set never scores below the incumbent on
that batch. All randomness flows through per-(purpose, iteration) RNG
substreams derived from one seed, so runs are reproducible regardless of
evaluation parallelism.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .generation import improve_candidates, propose_initial
from .llm import CompletionClient
from .shapley import ShapleyEstimate, loo_worst_index, mc_shapley, worst_index
from .types import DataPoint, EvalBatch, Example, ExampleSet, TaskSpec, merge_batches
from .utility import UtilityCache, make_value_fn

logger = logging.getLogger(__name__)

SELECTORS = ("shapley", "loo")
INSERT_POSITIONS = ("append", "in_place")

# RNG substream purposes; every draw in a run comes from (seed, purpose, iteration).
PROPOSE_STREAM, SUBSAMPLE_STREAM, REPLAY_STREAM, IMPROVE_STREAM, SHAPLEY_STREAM = range(5)


def rng_stream(seed: int, purpose: int, iteration: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, iteration]))


@dataclass(frozen=True)
class OptimizerConfig:
    """Loop hyperparameters; defaults are the general-purpose setting."""

    n_initial: int = 16
    subsample_size: int = 70
    n_iterations: int = 15
    n_candidates: int = 10
    replay_size: int = 5
    n_permutations: int = 3
    selector: str = "shapley"
    initial_only: bool = False
    insert_position: str = "append"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in (
            "n_initial",
            "subsample_size",
            "n_iterations",
            "n_candidates",
            "replay_size",
            "n_permutations",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.replay_size > self.subsample_size:
            raise ValueError("replay_size must not exceed subsample_size")
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        if self.insert_position not in INSERT_POSITIONS:
            raise ValueError(f"insert_position must be one of {INSERT_POSITIONS}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class ReplayBuffer:
    """Points carried over from earlier subsamples, deduplicated by id."""

    points: tuple[DataPoint, ...] = ()

    def ids(self) -> set[str]:
        return {p.id for p in self.points}

    def __len__(self) -> int:
        return len(self.points)


def update_replay(
    buffer: ReplayBuffer, batch: EvalBatch, size: int, rng: np.random.Generator
) -> ReplayBuffer:
    """Buffer unioned with a uniform sample (without replacement) from the batch."""
    if size < 0:
        raise ValueError("size must be >= 0")
    if size == 0 or len(batch) == 0:
        return buffer
    take = min(size, len(batch))
    chosen = rng.choice(len(batch), size=take, replace=False)
    known = buffer.ids()
    added = tuple(
        batch.points[int(i)] for i in chosen if batch.points[int(i)].id not in known
    )
    return ReplayBuffer(buffer.points + added)


def subsample(dataset: Sequence[DataPoint], size: int, rng: np.random.Generator) -> EvalBatch:
    """Uniform sample of min(size, |dataset|) points, without replacement."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    take = min(size, len(dataset))
    chosen = rng.choice(len(dataset), size=take, replace=False)
    return EvalBatch(tuple(dataset[int(i)] for i in chosen))


def decide(a_base: float, a_drop: float, a_best: float | None, set_size: int) -> str:
    """Replace/drop/keep given the three comparable scores.

    Ties prefer replace over drop over keep; dropping the last example is
    never allowed. a_best is None when no candidate was available.
    """
    if set_size < 1:
        raise ValueError("set_size must be >= 1")
    if a_best is not None and a_best >= a_drop and a_best >= a_base:
        return "replace"
    if a_drop >= a_base and set_size > 1:
        return "drop"
    return "keep"


@dataclass(frozen=True)
class Decision:
    kind: str
    replaced_index: int | None = None
    candidate: Example | None = None
    scores: tuple[float, float, float | None] = (0.0, 0.0, None)

    def __post_init__(self) -> None:
        if self.kind == "replace" and (self.replaced_index is None or self.candidate is None):
            raise ValueError("replace decisions carry an index and a candidate")
        if self.kind == "drop" and (self.replaced_index is None or self.candidate is not None):
            raise ValueError("drop decisions carry an index only")
        if self.kind == "keep" and (self.replaced_index is not None or self.candidate is not None):
            raise ValueError("keep decisions carry neither index nor candidate")

    def to_dict(self) -> dict:
        a_base, a_drop, a_best = self.scores
        return {
            "kind": self.kind,
            "replaced_index": self.replaced_index,
            "candidate_id": self.candidate.id if self.candidate else None,
            "scores": {"base": a_base, "drop": a_drop, "best": a_best},
        }


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    batch_ids: tuple[str, ...]
    selector: str
    shapley: ShapleyEstimate | None
    worst: int
    decision: Decision
    utility_after: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "batch_point_ids": list(self.batch_ids),
            "selector": self.selector,
            "shapley": self.shapley.to_dict() if self.shapley else None,
            "worst_index": self.worst,
            "decision": self.decision.to_dict(),
            "utility_after": self.utility_after,
        }


@dataclass
class RunLog:
    seed: int
    config: dict
    records: list[IterationRecord] = field(default_factory=list)
    final_examples: ExampleSet = field(default_factory=ExampleSet)

    @property
    def final_utility(self) -> float | None:
        return self.records[-1].utility_after if self.records else None

    def decision_counts(self) -> dict[str, int]:
        counts = {"replace": 0, "drop": 0, "keep": 0}
        for record in self.records:
            counts[record.decision.kind] += 1
        return counts


def run_optimization(
    config: OptimizerConfig,
    dataset: Sequence[DataPoint],
    task: TaskSpec,
    proposer: CompletionClient,
    improver: CompletionClient,
    evaluator: CompletionClient,
    cache: UtilityCache | None = None,
    record_sink: Callable[[IterationRecord], None] | None = None,
    initial_examples: ExampleSet | None = None,
) -> tuple[ExampleSet, RunLog]:
    """Full crafting run: propose an initial set, then iterate replace/drop/keep.

    With `initial_only` the proposer output is returned untouched and the log
    carries zero iteration records. `record_sink`, when given, receives each
    record as soon as the iteration finishes (useful for crash post-mortems).
    `initial_examples` warm-starts the loop instead of calling the proposer.
    """
    if not dataset and not config.initial_only:
        raise ValueError("dataset must be non-empty")
    cache = cache if cache is not None else UtilityCache()
    log = RunLog(seed=config.seed, config=asdict(config))

    if initial_examples is not None and len(initial_examples) > 0:
        examples = initial_examples
    else:
        examples = propose_initial(
            proposer, config.n_initial, task, rng_stream(config.seed, PROPOSE_STREAM)
        )
    if config.initial_only:
        log.final_examples = examples
        return examples, log

    buffer = ReplayBuffer()
    for t in range(config.n_iterations):
        fresh = subsample(dataset, config.subsample_size, rng_stream(config.seed, SUBSAMPLE_STREAM, t))
        batch = merge_batches(fresh, buffer.points)
        value_fn = make_value_fn(batch, evaluator, task, cache)

        a_base = value_fn(examples.items)
        estimate: ShapleyEstimate | None = None
        if config.selector == "shapley":
            estimate = mc_shapley(
                examples.items, value_fn, config.n_permutations, rng_stream(config.seed, SHAPLEY_STREAM, t)
            )
            i_star = worst_index(estimate)
        else:
            i_star = loo_worst_index(examples.items, value_fn)

        reduced = examples.without(i_star)
        a_drop = value_fn(reduced.items)
        candidates = improve_candidates(
            improver,
            reduced,
            config.n_candidates,
            task,
            rng_stream(config.seed, IMPROVE_STREAM, t),
            tag=f"t{t:02d}",
        )

        best_candidate: Example | None = None
        best_set: ExampleSet | None = None
        a_best: float | None = None
        for candidate in candidates:
            trial = _place(reduced, candidate, i_star, config.insert_position)
            score = value_fn(trial.items)
            if a_best is None or score > a_best:
                best_candidate, best_set, a_best = candidate, trial, score

        kind = decide(a_base, a_drop, a_best, len(examples))
        if kind == "replace":
            assert best_set is not None and a_best is not None
            examples, utility_after = best_set, a_best
            decision = Decision("replace", i_star, best_candidate, (a_base, a_drop, a_best))
        elif kind == "drop":
            examples, utility_after = reduced, a_drop
            decision = Decision("drop", i_star, None, (a_base, a_drop, a_best))
        else:
            utility_after = a_base
            decision = Decision("keep", None, None, (a_base, a_drop, a_best))
        assert utility_after >= a_base - 1e-12, "decision regressed below the incumbent"

        buffer = update_replay(buffer, fresh, config.replay_size, rng_stream(config.seed, REPLAY_STREAM, t))
        record = IterationRecord(
            iteration=t,
            batch_ids=batch.ids(),
            selector=config.selector,
            shapley=estimate,
            worst=i_star,
            decision=decision,
            utility_after=utility_after,
        )
        log.records.append(record)
        if record_sink is not None:
            record_sink(record)
        logger.info(
            "iteration %d: %s (base=%.4f drop=%.4f best=%s) utility=%.4f size=%d",
            t,
            kind,
            a_base,
            a_drop,
            "n/a" if a_best is None else f"{a_best:.4f}",
            utility_after,
            len(examples),
        )

    log.final_examples = examples
    return examples, log


def _place(reduced: ExampleSet, candidate: Example, removed_index: int, mode: str) -> ExampleSet:
    if mode == "in_place":
        return reduced.with_inserted(removed_index, candidate)
    return reduced.with_appended(candidate)
