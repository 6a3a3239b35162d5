"""Sentence scoring and choice-based evaluations.

Candidates are scored from a fresh context (no carry from other test
items), with ``<eos>`` excluded: the final punctuation token closes the
candidate, and its probability is part of the score.  Corpus perplexity,
which does include ``<eos>`` and carries context, lives with the models.

The six-way forced choice follows the fixed label order of
``transform.SIX_WAY_ORDER``; ties go to the earliest label and are
counted so silent ties can never masquerade as preferences.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

from .transform import FIRST, MAIN, NONE, SIX_WAY_ORDER

_LABEL_NAMES = {FIRST: "first", MAIN: "main", NONE: "none"}


def label_name(label) -> str:
    """(prepose, delete) pair -> e.g. 'prepose_first_delete_main'."""
    p, d = label
    return f"prepose_{_LABEL_NAMES[p]}_delete_{_LABEL_NAMES[d]}"


def sentence_logprob(model, tokens) -> float:
    """Total ln p of a candidate string, fresh context, no ``<eos>``."""
    return sum(model.sentence_logprobs(list(tokens), include_eos=False))


def per_word_perplexity(model, tokens) -> float:
    """exp(-mean ln p); the count includes the final punctuation token."""
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot score an empty candidate")
    lps = model.sentence_logprobs(tokens, include_eos=False)
    return math.exp(-sum(lps) / len(lps))


def slor(model, unigram_model, tokens) -> float:
    """Per-word log-probability above the unigram baseline; higher wins."""
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot score an empty candidate")
    return (
        sentence_logprob(model, tokens)
        - sentence_logprob(unigram_model, tokens)
    ) / len(tokens)


METRICS = ("perplexity", "slor")


def forced_choice_six(model, six_tuple, metric="perplexity",
                      unigram_model=None):
    """Pick one of the six candidates; returns (label, tied).

    ``six_tuple`` is the candidate list from ``transform.build_six_tuple``
    (report order).  ``metric`` is ``"perplexity"`` (argmin) or ``"slor"``
    (argmax, needs ``unigram_model``).  ``tied`` flags an exact score tie
    with some other candidate, resolved to the earliest label.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if len(six_tuple) != len(SIX_WAY_ORDER):
        raise ValueError("six-way choice needs exactly six candidates")
    if metric == "perplexity":
        scores = [-per_word_perplexity(model, c.tokens) for c in six_tuple]
    else:
        if unigram_model is None:
            raise ValueError("slor choice needs a unigram model")
        scores = [slor(model, unigram_model, c.tokens) for c in six_tuple]
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    tied = scores.count(scores[best]) > 1
    return SIX_WAY_ORDER[best], tied


@dataclass
class ForcedChoiceResult:
    """Aggregated six-way choices for one model over one dataset."""

    model_id: str
    metric: str
    counts: dict
    n_items: int
    n_ties: int

    def __post_init__(self):
        for label in SIX_WAY_ORDER:
            self.counts.setdefault(label, 0)
        if sum(self.counts.values()) != self.n_items:
            raise ValueError("choice counts do not add up to item count")
        if self.n_items > 0:
            total = sum(self.proportions.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"proportions sum to {total}, not 1")

    @property
    def proportions(self) -> dict:
        if self.n_items == 0:
            return {label: 0.0 for label in SIX_WAY_ORDER}
        return {
            label: self.counts[label] / self.n_items
            for label in SIX_WAY_ORDER
        }

    def to_json(self) -> str:
        props = self.proportions
        return json.dumps(
            {
                "model_id": self.model_id,
                "metric": self.metric,
                "n_items": self.n_items,
                "n_ties": self.n_ties,
                "counts": {
                    label_name(lb): self.counts[lb] for lb in SIX_WAY_ORDER
                },
                "proportions": {
                    label_name(lb): props[lb] for lb in SIX_WAY_ORDER
                },
            },
            indent=2,
            sort_keys=True,
        )

    def to_csv(self) -> str:
        """Table with delete rule as rows and prepose rule as columns."""
        props = self.proportions
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["delete", "prepose_first", "prepose_main"])
        for d in (FIRST, MAIN, NONE):
            writer.writerow(
                [
                    f"delete_{_LABEL_NAMES[d]}",
                    f"{props[(FIRST, d)]:.6f}",
                    f"{props[(MAIN, d)]:.6f}",
                ]
            )
        return buf.getvalue()


def evaluate_six_way(model, six_tuples, metric="perplexity",
                     unigram_model=None, model_id="model") -> ForcedChoiceResult:
    counts = {label: 0 for label in SIX_WAY_ORDER}
    ties = 0
    for six in six_tuples:
        label, tied = forced_choice_six(
            model, six, metric=metric, unigram_model=unigram_model
        )
        counts[label] += 1
        ties += tied
    return ForcedChoiceResult(
        model_id=model_id,
        metric=metric,
        counts=counts,
        n_items=len(six_tuples),
        n_ties=ties,
    )


# -- minimal pairs ----------------------------------------------------------


@dataclass
class MinimalPairResult:
    n_items: int
    n_correct: int
    n_ties: int
    n_skipped: int
    margins: list = field(repr=False)

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_items if self.n_items else 0.0


def minimal_pair_accuracy(model, pairs, n_skipped=0) -> MinimalPairResult:
    """Fraction of pairs where total ln p(good) strictly beats ln p(bad).

    Ties count as incorrect; each item's margin ln p(good) - ln p(bad) is
    kept for reporting.
    """
    margins = []
    correct = ties = 0
    for good, bad in pairs:
        margin = sentence_logprob(model, good) - sentence_logprob(model, bad)
        margins.append(margin)
        if margin > 0:
            correct += 1
        elif margin == 0:
            ties += 1
    return MinimalPairResult(
        n_items=len(margins),
        n_correct=correct,
        n_ties=ties,
        n_skipped=n_skipped,
        margins=margins,
    )


def read_minimal_pairs(path):
    """Parse a TSV of ``good<TAB>bad`` token strings.

    Malformed lines (wrong field count, empty side) are skipped with a
    warning; returns (pairs, skipped line count).
    """
    pairs = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                warnings.warn(f"{path}:{lineno}: malformed pair line; skipped")
                skipped += 1
                continue
            pairs.append((parts[0].split(), parts[1].split()))
    return pairs, skipped
