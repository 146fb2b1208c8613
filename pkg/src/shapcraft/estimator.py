"""Scikit-learn style facade over the crafting loop.

`fit(X, y)` learns an ordered few-shot example set for the task, `predict`
runs the evaluator under the fitted prompt, and `score` applies the task
metric. Hyperparameters follow the estimator contract (stored verbatim in
__init__, validated in fit), so `get_params`, `set_params` and `clone` work
as usual.
"""

from __future__ import annotations

from typing import Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .llm import CompletionClient
from .metrics import DEFAULT_METRICS, metric_scale, normalize_label, score_prediction
from .optimizer import OptimizerConfig, run_optimization
from .prompting import assemble_prefix, assemble_prompt
from .types import DataPoint, TaskSpec
from .utility import UtilityCache


def _as_texts(X, name: str = "X") -> list[str]:
    texts = list(X)
    if not texts:
        raise ValueError(f"{name} must be non-empty")
    for i, value in enumerate(texts):
        if not isinstance(value, str) or not value.strip():
            raise ValueError(f"{name}[{i}] must be a non-empty string")
    return texts


def _as_gold(value, task_kind: str):
    if task_kind == "generation":
        if isinstance(value, str):
            return (value,)
        return tuple(value)
    if not isinstance(value, str):
        raise ValueError(f"{task_kind} targets must be strings, got {type(value).__name__}")
    return value


class FewShotPromptOptimizer(BaseEstimator):
    """Learns which few-shot examples to put in a prompt, and in what order.

    The three generation/evaluation roles are injected as completion
    clients (anything with `complete`/`complete_many`); use the package's
    mock backends for offline runs.

    Attributes after fit: `examples_` (the learned ordered example set),
    `prompt_` (instruction plus example blocks), `run_log_` (per-iteration
    records), `task_`, and `final_utility_`.
    """

    def __init__(
        self,
        instruction: str = "",
        task_kind: str = "classification",
        labels: Sequence[str] | None = None,
        metric: str | None = None,
        input_field: str = "",
        target_field: str = "",
        description: str = "",
        n_initial: int = 16,
        subsample_size: int = 70,
        n_iterations: int = 15,
        n_candidates: int = 10,
        replay_size: int = 5,
        n_permutations: int = 3,
        selector: str = "shapley",
        initial_only: bool = False,
        insert_position: str = "append",
        cache_mode: str = "ordered",
        random_state: int = 0,
        proposer: CompletionClient | None = None,
        improver: CompletionClient | None = None,
        evaluator: CompletionClient | None = None,
    ):
        self.instruction = instruction
        self.task_kind = task_kind
        self.labels = labels
        self.metric = metric
        self.input_field = input_field
        self.target_field = target_field
        self.description = description
        self.n_initial = n_initial
        self.subsample_size = subsample_size
        self.n_iterations = n_iterations
        self.n_candidates = n_candidates
        self.replay_size = replay_size
        self.n_permutations = n_permutations
        self.selector = selector
        self.initial_only = initial_only
        self.insert_position = insert_position
        self.cache_mode = cache_mode
        self.random_state = random_state
        self.proposer = proposer
        self.improver = improver
        self.evaluator = evaluator

    def _task(self) -> TaskSpec:
        return TaskSpec(
            instruction=self.instruction,
            task_kind=self.task_kind,
            labels=tuple(self.labels) if self.labels else None,
            metric=self.metric or DEFAULT_METRICS.get(self.task_kind, "exact_match"),
            input_field=self.input_field,
            target_field=self.target_field,
            description=self.description,
        )

    def _points(self, X, y) -> tuple[DataPoint, ...]:
        texts = _as_texts(X)
        golds = list(y)
        if len(golds) != len(texts):
            raise ValueError(f"X and y disagree in length ({len(texts)} vs {len(golds)})")
        return tuple(
            DataPoint(id=str(i + 1), input=text, gold=_as_gold(gold, self.task_kind))
            for i, (text, gold) in enumerate(zip(texts, golds))
        )

    def fit(self, X, y):
        """Craft the example set against (X, y) and freeze it on the estimator."""
        for role in ("proposer", "improver", "evaluator"):
            if getattr(self, role) is None:
                raise ValueError(f"a {role} completion client is required to fit")
        task = self._task()
        points = self._points(X, y)
        config = OptimizerConfig(
            n_initial=self.n_initial,
            subsample_size=self.subsample_size,
            n_iterations=self.n_iterations,
            n_candidates=self.n_candidates,
            replay_size=self.replay_size,
            n_permutations=self.n_permutations,
            selector=self.selector,
            initial_only=self.initial_only,
            insert_position=self.insert_position,
            seed=self.random_state,
        )
        cache = UtilityCache(key_mode=self.cache_mode)
        examples, log = run_optimization(
            config,
            points,
            task,
            proposer=self.proposer,
            improver=self.improver,
            evaluator=self.evaluator,
            cache=cache,
        )
        self.task_ = task
        self.examples_ = examples
        self.run_log_ = log
        self.prompt_ = assemble_prefix(task, examples.items)
        self.final_utility_ = log.final_utility
        return self

    def predict(self, X) -> list[str]:
        """Evaluator outputs under the fitted prompt, one per input.

        Classification predictions are normalized onto the label set when
        they match one; everything else is returned as raw completion text.
        """
        check_is_fitted(self, "examples_")
        texts = _as_texts(X)
        prompts = [assemble_prompt(self.task_, self.examples_.items, text) for text in texts]
        raw = self.evaluator.complete_many(prompts)
        if self.task_.task_kind != "classification":
            return raw
        canonical = {normalize_label(label): label for label in self.task_.labels or ()}
        return [canonical.get(normalize_label(text), normalize_label(text)) for text in raw]

    def score(self, X, y) -> float:
        """Mean task-metric score in [0, 1] under the fitted prompt."""
        check_is_fitted(self, "examples_")
        points = self._points(X, y)
        prompts = [assemble_prompt(self.task_, self.examples_.items, p.input) for p in points]
        raw = self.evaluator.complete_many(prompts)
        scale = metric_scale(self.task_.metric)
        total = sum(
            score_prediction(self.task_.metric, prediction, point, self.task_) / scale
            for point, prediction in zip(points, raw)
        )
        return total / len(points)
