"""Question-formation evaluation over declarative/question pairs.

Given a model trained on ``declarative . question ?`` strings, the probe
conditions on the declarative plus its period and inspects the model's
greedy predictions for the question: the first predicted word decides
which fronting rule the model follows (linear takes the sentence's first
auxiliary, hierarchical the main-clause one), and the remaining positions
are compared token by token under teacher forcing.

Full-question accuracy uses teacher forcing (gold history at each
position) so "every token after the period" is deterministic and
well-defined; a free-running greedy decode is available separately for
qualitative inspection.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .transform import DEFAULT_AUX_CLASSES, AnnotatedSentence, PairExample

LINEAR_RULE = "LinearQ"
HIERARCHICAL_RULE = "HierarchicalQ"
OTHER = "other"

# report order for consistency summaries
CONSISTENCY_ORDER = ("linear_only", "hierarchical_only", "both", "neither")


class QFFormatError(ValueError):
    """An evaluation pair is malformed (no '.', or an empty question)."""


@dataclass(frozen=True)
class QFJudgment:
    """One pair's verdict: predictions, accuracies, rule consistency."""

    pair: PairExample
    predicted_first: str
    predicted_question: tuple
    first_word_correct: bool
    full_correct: bool
    consistency: frozenset
    chosen_aux_identity: str

    def __post_init__(self):
        object.__setattr__(
            self, "predicted_question", tuple(self.predicted_question)
        )
        object.__setattr__(self, "consistency", frozenset(self.consistency))
        if self.full_correct and not self.first_word_correct:
            raise ValueError("a fully correct question must start correctly")
        bad = self.consistency - {LINEAR_RULE, HIERARCHICAL_RULE}
        if bad:
            raise ValueError(f"unknown consistency labels {sorted(bad)}")

    @property
    def consistency_category(self) -> str:
        has_lin = LINEAR_RULE in self.consistency
        has_hier = HIERARCHICAL_RULE in self.consistency
        if has_lin and has_hier:
            return "both"
        if has_lin:
            return "linear_only"
        if has_hier:
            return "hierarchical_only"
        return "neither"

    def to_json(self) -> str:
        return json.dumps(
            {
                "declarative": " ".join(self.pair.declarative),
                "question": " ".join(self.pair.question),
                "predicted_first": self.predicted_first,
                "predicted_question": " ".join(self.predicted_question),
                "first_word_correct": self.first_word_correct,
                "full_correct": self.full_correct,
                "consistency": sorted(self.consistency),
                "chosen_aux_identity": self.chosen_aux_identity,
            },
            sort_keys=True,
        )


def classify_first_word(decl: AnnotatedSentence, predicted_first,
                        aux_vocab=None):
    """-> (consistency set, chosen_aux_identity).

    LinearQ iff the prediction equals the declarative's first auxiliary
    token, HierarchicalQ iff it equals the main one; both when those
    coincide.  Identity is the predicted token when it is any auxiliary
    vocabulary item, else ``"other"``.
    """
    if aux_vocab is None:
        aux_vocab = DEFAULT_AUX_CLASSES
    consistency = set()
    if predicted_first == decl.first_aux:
        consistency.add(LINEAR_RULE)
    if predicted_first == decl.main_aux:
        consistency.add(HIERARCHICAL_RULE)
    identity = predicted_first if predicted_first in aux_vocab else OTHER
    return frozenset(consistency), identity


def _check_pair(pair):
    if "." not in pair.declarative:
        raise QFFormatError("pair's declarative lacks a '.' token")
    if not pair.question:
        raise QFFormatError("pair has an empty question")


def free_decode(model, declarative, max_length=40):
    """Greedy decode after ``declarative``; stops at '?' or ``max_length``."""
    id_to_token = model.vocab.id_to_token
    toks = list(declarative)
    out = []
    for _ in range(max_length):
        probs = model.predict_next(toks)
        tok = id_to_token[int(np.argmax(probs))]
        out.append(tok)
        toks.append(tok)
        if tok == "?":
            break
    return tuple(out)


def judge_pair(model, decl: AnnotatedSentence, pair: PairExample,
               aux_vocab=None, free_running=False) -> QFJudgment:
    """Score one declarative/question pair.

    Teacher-forced by default: position i of the question is predicted from
    the gold history up to i.  With ``free_running`` the predicted question
    is a greedy continuation instead (the first word is identical either
    way, so rule classification is unaffected).
    """
    _check_pair(pair)
    cut = len(pair.declarative)
    gold = pair.question
    id_to_token = model.vocab.id_to_token
    if free_running:
        predicted = free_decode(
            model, pair.declarative, max_length=max(2 * len(gold), 10)
        )
        predicted_first = predicted[0]
    else:
        rows = model.next_logprob_rows(pair.concatenated)
        ids = np.argmax(rows[cut : cut + len(gold)], axis=1)
        predicted = tuple(id_to_token[int(i)] for i in ids)
        predicted_first = predicted[0]
    first_ok = predicted_first == gold[0]
    full_ok = predicted == gold
    consistency, identity = classify_first_word(
        decl, predicted_first, aux_vocab=aux_vocab
    )
    return QFJudgment(
        pair=pair,
        predicted_first=predicted_first,
        predicted_question=predicted,
        first_word_correct=first_ok,
        full_correct=full_ok,
        consistency=consistency,
        chosen_aux_identity=identity,
    )


@dataclass
class QFEvalResult:
    """Aggregate over one pair dataset, annotations kept for breakdowns."""

    model_id: str
    annotations: list = field(repr=False)
    judgments: list = field(repr=False)

    @property
    def n_items(self) -> int:
        return len(self.judgments)

    @property
    def first_word_accuracy(self) -> float:
        if not self.judgments:
            return 0.0
        return sum(j.first_word_correct for j in self.judgments) / self.n_items

    @property
    def full_question_accuracy(self) -> float:
        if not self.judgments:
            return 0.0
        return sum(j.full_correct for j in self.judgments) / self.n_items

    @property
    def consistency_proportions(self) -> dict:
        out = {key: 0 for key in CONSISTENCY_ORDER}
        for j in self.judgments:
            out[j.consistency_category] += 1
        n = self.n_items
        return {key: (out[key] / n if n else 0.0) for key in CONSISTENCY_ORDER}

    def rule_rate(self, rule) -> float:
        """Fraction of judgments whose consistency set contains ``rule``."""
        if not self.judgments:
            return 0.0
        return sum(rule in j.consistency for j in self.judgments) / self.n_items

    def to_json(self) -> str:
        return json.dumps(
            {
                "model_id": self.model_id,
                "n_items": self.n_items,
                "first_word_accuracy": self.first_word_accuracy,
                "full_question_accuracy": self.full_question_accuracy,
                "consistency": self.consistency_proportions,
            },
            indent=2,
            sort_keys=True,
        )

    def dump_judgments(self, path) -> None:
        """One JSON object per item, newline separated."""
        with open(path, "w", encoding="utf-8") as fh:
            for j in self.judgments:
                fh.write(j.to_json() + "\n")


def evaluate_pairs(model, items, aux_vocab=None, free_running=False,
                   model_id="model") -> QFEvalResult:
    """Judge every (AnnotatedSentence, PairExample) item with one model."""
    annotations = []
    judgments = []
    for decl, pair in items:
        annotations.append(decl)
        judgments.append(
            judge_pair(
                model, decl, pair,
                aux_vocab=aux_vocab, free_running=free_running,
            )
        )
    return QFEvalResult(
        model_id=model_id, annotations=annotations, judgments=judgments
    )


def items_from_annotations(decls):
    """Pair each annotated declarative with its well-formed question."""
    from .transform import make_pair

    return [(decl, make_pair(decl)) for decl in decls]


def first_word_accuracy(model, items, aux_vocab=None):
    """-> (accuracy, per-item judgments)."""
    result = evaluate_pairs(model, items, aux_vocab=aux_vocab)
    return result.first_word_accuracy, result.judgments


def full_question_accuracy(model, items, aux_vocab=None) -> float:
    return evaluate_pairs(model, items, aux_vocab=aux_vocab).full_question_accuracy


# -- lexical breakdown -------------------------------------------------------


@dataclass(frozen=True)
class BreakdownRow:
    """Prediction proportions for one unordered auxiliary pair.

    Position view (p_first/p_main) and identity view (p_aux_x/p_aux_y)
    partition the same judgments, so each view sums to 1 with p_other.
    """

    pair: tuple
    n: int
    p_first: float
    p_main: float
    p_aux_x: float
    p_aux_y: float
    p_other: float


def lexical_breakdown(result: QFEvalResult) -> list:
    """Rows keyed by the unordered {first aux, main aux} token pair.

    Both orderings of a pair ("can ... do" and "do ... can") land in one
    row; aux_x/aux_y are the alphabetically ordered identities.
    """
    groups: dict = {}
    for decl, j in zip(result.annotations, result.judgments):
        key = tuple(sorted((decl.first_aux, decl.main_aux)))
        groups.setdefault(key, []).append((decl, j))
    rows = []
    for key in sorted(groups):
        members = groups[key]
        n = len(members)
        first = sum(j.predicted_first == d.first_aux for d, j in members)
        main = sum(j.predicted_first == d.main_aux for d, j in members)
        aux_x = sum(j.predicted_first == key[0] for d, j in members)
        aux_y = sum(j.predicted_first == key[1] for d, j in members)
        other = sum(
            j.predicted_first not in (d.first_aux, d.main_aux)
            for d, j in members
        )
        rows.append(
            BreakdownRow(
                pair=key,
                n=n,
                p_first=first / n,
                p_main=main / n,
                p_aux_x=aux_x / n,
                p_aux_y=aux_y / n,
                p_other=other / n,
            )
        )
    return rows


def breakdown_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["pair", "n", "p_first", "p_main", "p_auxX", "p_auxY", "p_other"]
    )
    for row in rows:
        writer.writerow(
            [
                "/".join(row.pair),
                row.n,
                f"{row.p_first:.6f}",
                f"{row.p_main:.6f}",
                f"{row.p_aux_x:.6f}",
                f"{row.p_aux_y:.6f}",
                f"{row.p_other:.6f}",
            ]
        )
    return buf.getvalue()
