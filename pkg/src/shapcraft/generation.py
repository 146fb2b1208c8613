"""Example generation: role prompt templates, response parsing, and the
propose/improve operations built on them.

Templates are plain format strings rendered in one strict pass; a missing
value raises instead of letting a raw placeholder reach the wire. Responses
are parsed back through the same numbered block format the prompts demand,
so render -> parse round-trips.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .llm import CompletionClient
from .metrics import normalize_label
from .prompting import render_example_block
from .types import Example, ExampleSet, TaskSpec

logger = logging.getLogger(__name__)

RETRY_ATTEMPTS = 3

LENGTH_BUCKETS = ("very_short", "medium", "long")
_BUCKET_TEXT = {
    "very_short": "very short (<= 5 words per sentence)",
    "medium": "medium length (6-9 words per sentence)",
    "long": "longer (10-14 words per sentence)",
}


class TemplateError(ValueError):
    """A template placeholder was left unfilled."""


class GenerationError(RuntimeError):
    """The model produced no usable examples within the retry budget."""


@dataclass(frozen=True)
class DiversityPlan:
    """Per-example directives randomizing sentence count and length.

    With two or more directives the plan always contains at least one
    very-short and one long entry.
    """

    directives: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        for count, bucket in self.directives:
            if count not in (1, 2, 3):
                raise ValueError("sentence count must be 1, 2 or 3")
            if bucket not in LENGTH_BUCKETS:
                raise ValueError(f"unknown length bucket {bucket!r}")
        buckets = [b for _, b in self.directives]
        if len(self.directives) >= 2:
            if "very_short" not in buckets or "long" not in buckets:
                raise ValueError("plans for 2+ examples need a very-short and a long entry")

    def render(self) -> str:
        lines = []
        for i, (count, bucket) in enumerate(self.directives, start=1):
            noun = "sentence" if count == 1 else "sentences"
            lines.append(f"- Example{i}: {count} {noun}, {_BUCKET_TEXT[bucket]}.")
        return "\n".join(lines)


def make_diversity_plan(count: int, rng: np.random.Generator) -> DiversityPlan:
    if count < 1:
        raise ValueError("count must be >= 1")
    sentence_counts = [int(c) for c in rng.integers(1, 4, size=count)]
    buckets = [LENGTH_BUCKETS[int(i)] for i in rng.integers(0, 3, size=count)]
    if count >= 2:
        if "very_short" not in buckets:
            buckets[int(rng.integers(0, count))] = "very_short"
        if "long" not in buckets:
            keep = buckets.index("very_short")
            slots = [i for i in range(count) if i != keep]
            buckets[slots[int(rng.integers(0, len(slots)))]] = "long"
    return DiversityPlan(tuple(zip(sentence_counts, buckets)))


_PROPOSER_HEADER = (
    "You are a data generator that writes high-quality in-context learning "
    "examples for {TASK_DESCRIPTION}. Create exactly {NUM_EXAMPLES} training "
    "examples in THIS STRICT format only:"
)

_IMPROVER_HEADER = (
    "You are improving in-context examples for {TASK_DESCRIPTION}. Generate "
    "replacements that diversify length (1-3 sentences) and topic, avoid "
    "paraphrasing, and help the task.\n\n"
    "You are given the CURRENT examples (do not repeat or paraphrase them):\n"
    "{CURRENT_EXAMPLES}\n\n"
    "Now create exactly {NUM_CANDIDATES} NEW examples in THIS STRICT format:"
)

_TARGET_SLOTS = {
    "classification": "{LABEL}",
    "generation": '"<text>"',
    "math": "<reasoning ending with the final number>",
}

_SHARED_RULES = (
    '- Each example\'s "{INPUT_FIELD}" must contain exactly the number of sentences specified above (1-3).\n'
    "- Keep sentences concise: typically 3-14 words each. Across the set, include at least one very short (<= 5 words) and one longer (10-14 words).\n"
    "- Use only ASCII characters. Do NOT include double quotes inside the text.\n"
    "- Use exactly ONE `{INPUT_FIELD}:` line per example; if multiple sentences are needed, put them inside the same quotes separated by a space.\n"
)

_KIND_RULES = {
    "classification": (
        "- Make the writing naturally match the requested label in the everyday sense of the word.\n"
        "- Do NOT mention the label or talk about labels in the text (no meta commentary).\n"
    ),
    "generation": (
        "- Make the {TARGET_FIELD} a faithful, shorter plain-words rendering of the {INPUT_FIELD}.\n"
    ),
    "math": (
        "- Make the {INPUT_FIELD} a self-contained word problem with a single numeric answer.\n"
        "- End the {TARGET_FIELD} with the final numeric answer.\n"
    ),
}

_IMPROVER_EXTRA_RULES = {
    "classification": (
        "- Make topics clearly different from the given examples and from each other; avoid near-duplicates or paraphrases.\n"
        "- Prefer balancing labels; if unsure, choose the minority label: {MINORITY_LABEL}.\n"
    ),
    "generation": (
        "- Make topics clearly different from the given examples and from each other; avoid near-duplicates or paraphrases.\n"
    ),
    "math": (
        "- Make problems clearly different from the given examples and from each other.\n"
    ),
}

_TAIL_RULES = (
    "- No Markdown/code fences.\n"
    "- Output ONLY the examples in the exact format above; no extra text."
)


def _skeleton(task_kind: str, count_placeholder: str) -> str:
    slot = _TARGET_SLOTS[task_kind]

    def block(n: str) -> str:
        return f'Example{n}:\n{{INPUT_FIELD}}: "<text>"\n{{TARGET_FIELD}}: {slot}'

    return "\n\n".join([block("1"), block("2"), "...", block(count_placeholder)])


def proposer_template(task: TaskSpec) -> str:
    return (
        _PROPOSER_HEADER
        + "\n\n"
        + _skeleton(task.task_kind, "{NUM_EXAMPLES}")
        + "\n\nDiversity plan (MUST FOLLOW):\n{DIVERSITY_PLAN}\n\nRules:\n"
        + _SHARED_RULES
        + _KIND_RULES[task.task_kind]
        + _TAIL_RULES
    )


def improver_template(task: TaskSpec) -> str:
    return (
        _IMPROVER_HEADER
        + "\n\n"
        + _skeleton(task.task_kind, "{NUM_CANDIDATES}")
        + "\n\nDiversity plan (MUST FOLLOW):\n{DIVERSITY_PLAN}\n\nRules:\n"
        + _SHARED_RULES
        + _IMPROVER_EXTRA_RULES[task.task_kind]
        + _TAIL_RULES
    )


def render_template(template: str, **values) -> str:
    """Fill every placeholder; fail loudly on any left unfilled."""
    try:
        return template.format(**values)
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"unfilled template placeholder: {exc}") from exc


def task_description(task: TaskSpec) -> str:
    if task.description:
        return task.description
    if task.task_kind == "classification":
        labels = ", ".join(task.labels or ())
        return f"{len(task.labels or ())}-way text classification with labels {labels}"
    if task.task_kind == "math":
        return "math word problems with numeric final answers"
    return f"a text generation task (write the {task.target_field} for each {task.input_field})"


_FENCE_RE = re.compile(r"^[ \t]*```[\w-]*[ \t]*$", re.MULTILINE)


def parse_examples(
    text: str,
    input_field: str = "Sentence",
    target_field: str = "Label",
    labels: Sequence[str] | None = None,
) -> list[tuple[str, str]]:
    """(input, target) pairs from numbered example blocks, in textual order.

    Tolerates leading whitespace, numbering gaps and stray code fences.
    Blocks with a blank side, or a target outside the label set, are
    dropped with a warning instead of failing the whole response.
    """
    cleaned = _FENCE_RE.sub("", text)
    pattern = re.compile(
        rf"Example\s*\d+\s*:[ \t]*\n"
        rf"\s*{re.escape(input_field)}\s*:[ \t]*\"([^\"\n]*)\"[ \t]*\n"
        rf"\s*{re.escape(target_field)}\s*:[ \t]*([^\n]*)"
    )
    canonical = None
    if labels is not None:
        canonical = {normalize_label(label): label for label in labels}
    pairs: list[tuple[str, str]] = []
    for match in pattern.finditer(cleaned):
        input_text = match.group(1).strip()
        target_text = match.group(2).strip().strip('"').strip()
        if not input_text or not target_text:
            logger.warning("discarding example block with a blank field")
            continue
        if not (input_text.isascii() and target_text.isascii()):
            logger.warning("discarding example block with non-ASCII content")
            continue
        if canonical is not None:
            norm = normalize_label(target_text)
            if norm not in canonical:
                logger.warning("discarding example with label %r outside the label set", target_text)
                continue
            target_text = canonical[norm]
        pairs.append((input_text, target_text))
    return pairs


def propose_initial(
    proposer: CompletionClient,
    k: int,
    task: TaskSpec,
    rng: np.random.Generator,
) -> ExampleSet:
    """Initial example set from the proposer role, k examples requested.

    Fewer-than-k parses are accepted with a warning as long as at least one
    example survived; an empty parse is retried with a fresh diversity plan
    before giving up.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    template = proposer_template(task)
    pairs: list[tuple[str, str]] = []
    for attempt in range(RETRY_ATTEMPTS):
        prompt = render_template(
            template,
            TASK_DESCRIPTION=task_description(task),
            NUM_EXAMPLES=k,
            DIVERSITY_PLAN=make_diversity_plan(k, rng).render(),
            LABEL="|".join(task.labels) if task.labels else "<text>",
            INPUT_FIELD=task.input_field,
            TARGET_FIELD=task.target_field,
        )
        response = proposer.complete(prompt)
        pairs = parse_examples(response, task.input_field, task.target_field, task.labels)
        if pairs:
            break
        logger.warning("proposer attempt %d/%d produced no parseable examples", attempt + 1, RETRY_ATTEMPTS)
    if not pairs:
        raise GenerationError(f"proposer produced no parseable examples in {RETRY_ATTEMPTS} attempts")
    if len(pairs) < k:
        logger.warning("proposer returned %d of %d requested examples", len(pairs), k)
    examples = tuple(
        Example(id=f"init-{i:02d}", input_text=inp, target_text=tgt, origin="proposed")
        for i, (inp, tgt) in enumerate(pairs[:k])
    )
    return ExampleSet(examples)


def minority_label(examples: Sequence[Example], labels: Sequence[str]) -> str:
    """Least frequent label among the examples; ties go lexicographically."""
    counts = {label: 0 for label in labels}
    lookup = {normalize_label(label): label for label in labels}
    for example in examples:
        label = lookup.get(normalize_label(example.target_text))
        if label is not None:
            counts[label] += 1
    return min(sorted(counts), key=counts.__getitem__)


def improve_candidates(
    improver: CompletionClient,
    current: ExampleSet,
    m: int,
    task: TaskSpec,
    rng: np.random.Generator,
    tag: str = "cand",
) -> list[Example]:
    """Up to m replacement candidates; verbatim copies of current inputs are dropped."""
    if m < 1:
        raise ValueError("m must be >= 1")
    template = improver_template(task)
    values = {
        "TASK_DESCRIPTION": task_description(task),
        "NUM_CANDIDATES": m,
        "CURRENT_EXAMPLES": render_example_block(task, current.items),
        "INPUT_FIELD": task.input_field,
        "TARGET_FIELD": task.target_field,
        "LABEL": "|".join(task.labels) if task.labels else "<text>",
    }
    if task.task_kind == "classification":
        values["MINORITY_LABEL"] = minority_label(current.items, task.labels or ())
    pairs: list[tuple[str, str]] = []
    for attempt in range(RETRY_ATTEMPTS):
        prompt = render_template(
            template, DIVERSITY_PLAN=make_diversity_plan(m, rng).render(), **values
        )
        response = improver.complete(prompt)
        pairs = parse_examples(response, task.input_field, task.target_field, task.labels)
        if pairs:
            break
        logger.warning("improver attempt %d/%d produced no parseable candidates", attempt + 1, RETRY_ATTEMPTS)
    if not pairs:
        raise GenerationError(f"improver produced no parseable candidates in {RETRY_ATTEMPTS} attempts")
    current_inputs = {e.input_text for e in current}
    candidates = []
    for i, (inp, tgt) in enumerate(pairs):
        if inp in current_inputs:
            logger.warning("discarding candidate duplicating a current example")
            continue
        candidates.append(
            Example(id=f"{tag}-c{i:02d}", input_text=inp, target_text=tgt, origin="improved")
        )
    return candidates[:m]
