"""Independent oracles used to freeze expected values.

Everything in this file is deliberately written without importing the
package under test, so the tests compare two unrelated code paths.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter


def shapley_by_subset_formula(n: int, value_of_set) -> list[float]:
    """Classic subset-enumeration Shapley values for an order-insensitive game.

    value_of_set takes a frozenset of indices drawn from range(n).
    """
    values = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        total = 0.0
        for size in range(n):
            weight = (
                math.factorial(size) * math.factorial(n - size - 1) / math.factorial(n)
            )
            for combo in itertools.combinations(others, size):
                s = frozenset(combo)
                total += weight * (value_of_set(s | {i}) - value_of_set(s))
        values.append(total)
    return values


def decide_by_truth_table(a_base: float, a_drop: float, a_best, set_size: int) -> str:
    """Replace/drop/keep selection written as a literal rule table."""
    if a_best is not None and a_best >= a_drop and a_best >= a_base:
        return "replace"
    if a_drop >= a_base and set_size > 1:
        return "drop"
    return "keep"


# --- reference SARI (transcribed from the metric author's public script) ---


def _sari_ngram_scores(sgrams, cgrams, rgramslist, numref):
    rgramcounter = Counter(g for grams in rgramslist for g in grams)

    sgramcounter_rep = Counter({g: c * numref for g, c in Counter(sgrams).items()})
    cgramcounter_rep = Counter({g: c * numref for g, c in Counter(cgrams).items()})

    keepgramcounter_rep = sgramcounter_rep & cgramcounter_rep
    keepgramcountergood_rep = keepgramcounter_rep & rgramcounter
    keepgramcounterall_rep = sgramcounter_rep & rgramcounter
    keeptmpscore1 = sum(
        keepgramcountergood_rep[g] / keepgramcounter_rep[g]
        for g in keepgramcountergood_rep
    )
    keeptmpscore2 = sum(
        keepgramcountergood_rep[g] / keepgramcounterall_rep[g]
        for g in keepgramcountergood_rep
    )
    keep_p = keeptmpscore1 / len(keepgramcounter_rep) if keepgramcounter_rep else 0.0
    keep_r = keeptmpscore2 / len(keepgramcounterall_rep) if keepgramcounterall_rep else 0.0
    keepscore = 2 * keep_p * keep_r / (keep_p + keep_r) if keep_p + keep_r else 0.0

    delgramcounter_rep = sgramcounter_rep - cgramcounter_rep
    delgramcountergood_rep = delgramcounter_rep - rgramcounter
    deltmpscore = sum(
        delgramcountergood_rep[g] / delgramcounter_rep[g] for g in delgramcountergood_rep
    )
    delscore = deltmpscore / len(delgramcounter_rep) if delgramcounter_rep else 0.0

    addgramcounter = set(cgramcounter_rep) - set(sgramcounter_rep)
    addgramcountergood = addgramcounter & set(rgramcounter)
    addgramcounterall = set(rgramcounter) - set(sgramcounter_rep)
    add_p = len(addgramcountergood) / len(addgramcounter) if addgramcounter else 0.0
    add_r = len(addgramcountergood) / len(addgramcounterall) if addgramcounterall else 0.0
    addscore = 2 * add_p * add_r / (add_p + add_r) if add_p + add_r else 0.0

    return keepscore, delscore, addscore


def _space_ngrams(sentence: str, n: int) -> list[str]:
    tokens = sentence.lower().split(" ")
    return [" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def reference_sari(source: str, candidate: str, references: list[str]) -> float:
    """Reference SARI on a 0..100 scale, single-space tokenization."""
    numref = len(references)
    keep_total = del_total = add_total = 0.0
    for n in range(1, 5):
        keep, delete, add = _sari_ngram_scores(
            _space_ngrams(source, n),
            _space_ngrams(candidate, n),
            [_space_ngrams(r, n) for r in references],
            numref,
        )
        keep_total += keep
        del_total += delete
        add_total += add
    return 100.0 * (keep_total / 4 + del_total / 4 + add_total / 4) / 3
