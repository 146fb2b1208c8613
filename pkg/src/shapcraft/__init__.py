"""shapcraft: Shapley-guided construction of few-shot prompts.

Builds a prompt's in-context example set by iteratively scoring examples
with Monte-Carlo Shapley estimation and replacing, dropping, or keeping the
least valuable one, evaluated on small subsamples stabilized by a replay
buffer. The evaluator is pluggable, so the combinatorial core runs (and is
tested) without any language model.
"""

from .estimator import FewShotPromptOptimizer
from .generation import (
    DiversityPlan,
    GenerationError,
    improve_candidates,
    make_diversity_plan,
    parse_examples,
    propose_initial,
)
from .llm import ChatCompletionsClient, CompletionClient, EndpointConfig, EndpointError, TransportError
from .metrics import exact_match, final_number, rouge_l, rouge_n, sari
from .optimizer import (
    Decision,
    IterationRecord,
    OptimizerConfig,
    ReplayBuffer,
    RunLog,
    decide,
    run_optimization,
    subsample,
    update_replay,
)
from .prompting import assemble_prefix, assemble_prompt
from .shapley import ShapleyEstimate, exact_shapley, loo_worst_index, mc_shapley, worst_index
from .types import DataPoint, EvalBatch, Example, ExampleSet, TaskSpec
from .utility import UtilityCache, batch_fingerprint, make_value_fn, utility

__version__ = "0.1.0"

__all__ = [
    "ChatCompletionsClient",
    "CompletionClient",
    "DataPoint",
    "Decision",
    "DiversityPlan",
    "EndpointConfig",
    "EndpointError",
    "EvalBatch",
    "Example",
    "ExampleSet",
    "FewShotPromptOptimizer",
    "GenerationError",
    "IterationRecord",
    "OptimizerConfig",
    "ReplayBuffer",
    "RunLog",
    "ShapleyEstimate",
    "TaskSpec",
    "TransportError",
    "UtilityCache",
    "assemble_prefix",
    "assemble_prompt",
    "batch_fingerprint",
    "decide",
    "exact_match",
    "exact_shapley",
    "final_number",
    "improve_candidates",
    "loo_worst_index",
    "make_diversity_plan",
    "make_value_fn",
    "mc_shapley",
    "parse_examples",
    "propose_initial",
    "rouge_l",
    "rouge_n",
    "run_optimization",
    "sari",
    "subsample",
    "update_replay",
    "utility",
    "worst_index",
]
