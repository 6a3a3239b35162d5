"""Evaluation-dataset builders: sampling, filtering, files, manifests.

Four dataset kinds, all derived from grammar samples:

``six-tuple``   declaratives passing the selectional filter, expanded to
                all six prepose/delete candidates (TSV, six lines per item);
``move-one``    minimal pairs from twin-auxiliary declaratives (the two
                auxiliaries share a surface form): move-main vs move-first
                questions as a ``good<TAB>bad`` TSV;
``pairs-eq``    declarative+question lines whose first and main auxiliary
                tokens coincide, so the linear and hierarchical fronting
                rules agree on the output;
``pairs-neq``   the same with token-distinct auxiliaries, so the two rules
                disagree and the first word diagnoses the rule.

Every writer is timestamp-free and emits a JSON manifest beside the data
file, so regenerating with one seed reproduces both files byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .grammar import generate
from .transform import (
    AnnotatedSentence,
    PairExample,
    annotate_tokens,
    build_move_one_pair,
    build_six_tuple,
    find_auxiliaries,
    make_pair,
    selectional_filter,
)

DATASET_KINDS = ("six-tuple", "move-one", "pairs-eq", "pairs-neq")

_MANIFEST_VERSION = 1


class DatasetError(ValueError):
    pass


def grammar_hash(grammar) -> str:
    """Stable digest of a grammar's semantic content.

    Hashes the start symbol, markers, and every production with its
    alternative order preserved (order matters to the sampler), so two
    source files with identical rules hash identically.
    """
    lines = [f"start {grammar.start}", "markers " + " ".join(sorted(grammar.markers))]
    for lhs in sorted(grammar.productions):
        for alt in grammar.productions[lhs]:
            lines.append(lhs + " -> " + " ".join(alt))
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _predicate(kind):
    if kind == "six-tuple":
        return selectional_filter
    if kind == "move-one":
        return lambda a: (
            a.first_aux_index != a.main_aux_index and a.first_aux == a.main_aux
        )
    if kind == "pairs-eq":
        return lambda a: a.first_aux == a.main_aux
    if kind == "pairs-neq":
        return lambda a: a.first_aux != a.main_aux
    raise DatasetError(f"unknown dataset kind {kind!r}; have {DATASET_KINDS}")


def sample_annotations(grammar, seed, count, predicate=None, max_factor=64):
    """``count`` annotated declaratives satisfying ``predicate``.

    Deterministic in ``seed``: the sampler is re-run from scratch with a
    doubled budget whenever the filter leaves too few samples, and a fresh
    run reproduces the shorter run's prefix.  Returns (annotations, number
    of raw samples drawn).
    """
    if count < 1:
        raise DatasetError("count must be >= 1")
    budget = count
    while True:
        raw = generate(grammar, seed=seed, count=budget)
        kept = []
        for _, deriv in raw:
            ann = find_auxiliaries(deriv, grammar)
            if predicate is None or predicate(ann):
                kept.append(ann)
                if len(kept) == count:
                    return kept, budget
        if budget >= count * max_factor:
            raise DatasetError(
                f"only {len(kept)}/{count} samples pass the filter after "
                f"{budget} draws; wrong grammar for this dataset kind?"
            )
        budget *= 2


# -- builders ----------------------------------------------------------------


def build_six_tuple_items(grammar, seed, count):
    anns, drawn = sample_annotations(grammar, seed, count, _predicate("six-tuple"))
    return [(ann, build_six_tuple(ann)) for ann in anns], drawn


def build_move_one_items(grammar, seed, count):
    anns, drawn = sample_annotations(grammar, seed, count, _predicate("move-one"))
    return [(ann, build_move_one_pair(ann)) for ann in anns], drawn


def build_pair_items(grammar, seed, count, kind):
    if kind not in ("pairs-eq", "pairs-neq"):
        raise DatasetError(f"pair dataset kind must be pairs-eq|pairs-neq, got {kind!r}")
    anns, drawn = sample_annotations(grammar, seed, count, _predicate(kind))
    return [(ann, make_pair(ann)) for ann in anns], drawn


# -- files -------------------------------------------------------------------


def write_six_tuple_file(path, items) -> int:
    """TSV ``declarative<TAB>prepose<TAB>delete<TAB>question``, 6 lines/item."""
    lines = []
    for ann, six in items:
        decl = " ".join(ann.tokens)
        for cand in six:
            lines.append(f"{decl}\t{cand.prepose}\t{cand.delete}\t{cand.text()}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def read_six_tuple_file(path):
    """-> list of (declarative tokens, six QuestionCandidate in report order)."""
    from .transform import SIX_WAY_ORDER, QuestionCandidate

    rows = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DatasetError(f"{path}:{lineno}: expected 4 tab-separated fields")
        rows.append(parts)
    if len(rows) % 6:
        raise DatasetError(f"{path}: line count {len(rows)} is not a multiple of 6")
    items = []
    for base in range(0, len(rows), 6):
        group = rows[base : base + 6]
        decl = tuple(group[0][0].split())
        six = []
        for (d, prepose, delete, question), expect in zip(group, SIX_WAY_ORDER):
            if d != group[0][0]:
                raise DatasetError(f"{path}: item at line {base + 1} mixes declaratives")
            if (prepose, delete) != expect:
                raise DatasetError(
                    f"{path}: item at line {base + 1} is out of report order"
                )
            six.append(
                QuestionCandidate(
                    tokens=tuple(question.split()), prepose=prepose, delete=delete
                )
            )
        items.append((decl, six))
    return items


def write_move_one_file(path, items) -> int:
    """Minimal-pair TSV: well-formed question, then its move-first twin."""
    lines = [
        " ".join(good) + "\t" + " ".join(bad) for _, (good, bad) in items
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def write_pair_file(path, items) -> int:
    """One concatenated ``declarative . question ?`` line per pair."""
    lines = [" ".join(pair.concatenated) for _, pair in items]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def read_pair_file(path, grammar):
    """Parse pair lines back into (annotation, PairExample) items.

    The declarative is everything through the first ``.``; its
    auxiliary annotation is recovered by parsing with ``grammar``.
    """
    items = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        tokens = tuple(line.split())
        if not tokens:
            continue
        if "." not in tokens:
            raise DatasetError(f"{path}:{lineno}: pair line lacks a '.' token")
        cut = tokens.index(".") + 1
        pair = PairExample(
            declarative=tokens[:cut], question=tokens[cut:], concatenated=tokens
        )
        ann = annotate_tokens(pair.declarative, grammar)
        items.append((ann, pair))
    return items


# -- manifests ----------------------------------------------------------------


def manifest_path(data_path) -> Path:
    return Path(str(data_path) + ".manifest.json")


def write_manifest(data_path, *, kind, grammar, grammar_source, seed,
                   requested, items, lines, drawn) -> dict:
    blob = {
        "format_version": _MANIFEST_VERSION,
        "kind": kind,
        "grammar": {"source": str(grammar_source), "sha256": grammar_hash(grammar)},
        "seed": seed,
        "counts": {
            "requested": requested,
            "items": items,
            "lines": lines,
            "sampled": drawn,
            "discarded": drawn - items,
        },
        "data_sha256": file_hash(data_path),
    }
    manifest_path(data_path).write_text(
        json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return blob


def generate_dataset(kind, grammar, seed, count, out_path, grammar_source="<grammar>"):
    """Build one dataset file plus manifest; returns the manifest dict."""
    if kind not in DATASET_KINDS:
        raise DatasetError(f"unknown dataset kind {kind!r}; have {DATASET_KINDS}")
    if kind == "six-tuple":
        items, drawn = build_six_tuple_items(grammar, seed, count)
        n_lines = write_six_tuple_file(out_path, items)
    elif kind == "move-one":
        items, drawn = build_move_one_items(grammar, seed, count)
        n_lines = write_move_one_file(out_path, items)
    else:
        items, drawn = build_pair_items(grammar, seed, count, kind)
        n_lines = write_pair_file(out_path, items)
    return write_manifest(
        out_path,
        kind=kind,
        grammar=grammar,
        grammar_source=grammar_source,
        seed=seed,
        requested=count,
        items=len(items),
        lines=n_lines,
        drawn=drawn,
    )
