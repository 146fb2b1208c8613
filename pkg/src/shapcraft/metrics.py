"""Per-point scoring functions and the metric registry.

Tokenization is lowercase with punctuation detached as separate tokens, so
golden values in the tests stay stable. All functions are pure.

Score ranges: exact_match and final_number are 0/1 indicators, the rouge
family lives in [0, 1], and sari in [0, 100]; `metric_scale` reports the
divisor that maps a metric onto [0, 1] for use as a utility.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Iterable, Sequence

from .types import DataPoint, TaskSpec

METRIC_NAMES = (
    "exact_match",
    "rouge1",
    "rouge2",
    "rougeL",
    "rouge_avg",
    "sari",
    "final_number",
)

DEFAULT_METRICS = {
    "classification": "exact_match",
    "generation": "rouge_avg",
    "math": "final_number",
}

_TOKEN_RE = re.compile(r"\w+(?:'\w+)*|[^\w\s]")
_NUMBER_RE = re.compile(r"[-+]?\d[\d,]*(?:\.\d+)?")
_QUOTES = "\"'`“”‘’"
_EDGE_CHARS = _QUOTES + ".,;:!?()[]{}<>* \t"


def tokenize(text: str) -> list[str]:
    """Lowercase tokens with punctuation split off from words."""
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def normalize_label(text: str) -> str:
    """First line of the text, trimmed of surrounding punctuation/quotes, case-folded."""
    stripped = text.strip()
    first = stripped.splitlines()[0] if stripped else ""
    return first.strip(_EDGE_CHARS).casefold()


def exact_match(prediction: str, gold_label: str, label_set: Iterable[str]) -> int:
    """1 iff the normalized prediction equals the normalized gold label."""
    labels = {normalize_label(l) for l in label_set}
    if not labels:
        raise ValueError("label_set must be non-empty")
    gold = normalize_label(gold_label)
    if gold not in labels:
        raise ValueError(f"gold label {gold_label!r} not in label set")
    return int(normalize_label(prediction) == gold)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rouge_n(candidate: str, references: Sequence[str], n: int) -> float:
    """Clipped n-gram overlap F1 against each reference, best reference wins."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    if not references:
        raise ValueError("references must be non-empty")
    cand_grams = Counter(ngrams(tokenize(candidate), n))
    if not cand_grams:
        return 0.0
    best = 0.0
    for reference in references:
        ref_grams = Counter(ngrams(tokenize(reference), n))
        if not ref_grams:
            continue
        overlap = sum((cand_grams & ref_grams).values())
        precision = overlap / sum(cand_grams.values())
        recall = overlap / sum(ref_grams.values())
        best = max(best, _f1(precision, recall))
    return best


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """Token-level longest-common-subsequence F1, best reference wins."""
    if not references:
        raise ValueError("references must be non-empty")
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        return 0.0
    best = 0.0
    for reference in references:
        ref_tokens = tokenize(reference)
        if not ref_tokens:
            continue
        lcs = _lcs_length(cand_tokens, ref_tokens)
        best = max(best, _f1(lcs / len(cand_tokens), lcs / len(ref_tokens)))
    return best


def _sari_operation_scores(
    source: Counter, candidate: Counter, reference: Counter, n_refs: int
) -> tuple[float, float, float]:
    """(keep-F1, delete-precision, add-F1) for one n-gram order.

    Source/candidate counts are replicated n_refs times so multi-reference
    counts compare like-for-like. An operation with nothing proposed and
    nothing desired by the references is vacuously satisfied and scores 1.
    """
    source_rep = Counter({g: c * n_refs for g, c in source.items()})
    cand_rep = Counter({g: c * n_refs for g, c in candidate.items()})

    keep_proposed = source_rep & cand_rep
    keep_desired = source_rep & reference
    if not keep_proposed and not keep_desired:
        keep = 1.0
    else:
        keep_good = keep_proposed & reference
        precision = (
            sum(keep_good[g] / keep_proposed[g] for g in keep_good) / len(keep_proposed)
            if keep_proposed
            else 0.0
        )
        recall = (
            sum(keep_good[g] / keep_desired[g] for g in keep_good) / len(keep_desired)
            if keep_desired
            else 0.0
        )
        keep = _f1(precision, recall)

    del_proposed = source_rep - cand_rep
    del_desired = source_rep - reference
    if not del_proposed and not del_desired:
        delete = 1.0
    else:
        del_good = del_proposed - reference
        delete = (
            sum(del_good[g] / del_proposed[g] for g in del_good) / len(del_proposed)
            if del_proposed
            else 0.0
        )

    add_proposed = set(cand_rep) - set(source_rep)
    add_desired = set(reference) - set(source_rep)
    if not add_proposed and not add_desired:
        add = 1.0
    else:
        add_good = add_proposed & set(reference)
        precision = len(add_good) / len(add_proposed) if add_proposed else 0.0
        recall = len(add_good) / len(add_desired) if add_desired else 0.0
        add = _f1(precision, recall)

    return keep, delete, add


def sari(source: str, candidate: str, references: Sequence[str]) -> float:
    """SARI on a 0..100 scale: mean over n=1..4 of keep-F1, delete-precision, add-F1."""
    if not references:
        raise ValueError("references must be non-empty")
    source_tokens = tokenize(source)
    cand_tokens = tokenize(candidate)
    ref_tokens = [tokenize(r) for r in references]
    total = 0.0
    for n in range(1, 5):
        reference_counts = Counter(g for tokens in ref_tokens for g in ngrams(tokens, n))
        keep, delete, add = _sari_operation_scores(
            Counter(ngrams(source_tokens, n)),
            Counter(ngrams(cand_tokens, n)),
            reference_counts,
            len(references),
        )
        total += (keep + delete + add) / 3
    return 100.0 * total / 4


def final_number(prediction: str, gold: str) -> int:
    """1 iff the last number-like token in the prediction equals the gold number."""
    gold_value = float(gold.replace(",", ""))
    matches = _NUMBER_RE.findall(prediction)
    if not matches:
        return 0
    return int(float(matches[-1].replace(",", "")) == gold_value)


def metric_scale(metric: str) -> float:
    """Divisor mapping a metric's native range onto [0, 1]."""
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRIC_NAMES}")
    return 100.0 if metric == "sari" else 1.0


def score_prediction(metric: str, prediction: str, point: DataPoint, task: TaskSpec) -> float:
    """Per-point score in the metric's native range."""
    if metric == "exact_match":
        if not isinstance(point.gold, str):
            raise ValueError("exact_match expects a single gold label")
        return float(exact_match(prediction, point.gold, task.labels or ()))
    if metric == "final_number":
        if not isinstance(point.gold, str):
            raise ValueError("final_number expects a single gold answer")
        return float(final_number(prediction, point.gold))
    references = list(point.references())
    if metric == "rouge1":
        return rouge_n(prediction, references, 1)
    if metric == "rouge2":
        return rouge_n(prediction, references, 2)
    if metric == "rougeL":
        return rouge_l(prediction, references)
    if metric == "rouge_avg":
        return (
            rouge_n(prediction, references, 1)
            + rouge_n(prediction, references, 2)
            + rouge_l(prediction, references)
        ) / 3
    if metric == "sari":
        return sari(point.input, prediction, references)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRIC_NAMES}")
