"""Corpus ingestion: tokenization, vocabulary thresholds, document splits.

Input layout: a corpus is a directory with one plain-text file per
document and one utterance per line.  Utterance order inside a document
is never changed; splitting assigns whole documents to partitions so no
document straddles a boundary.
"""

from __future__ import annotations

import collections
import random
import warnings
from dataclasses import dataclass
from pathlib import Path

UNK = "<unk>"
EOS = "<eos>"

# treebank-style clitic splits, longest suffix first; "don't" -> "do n't"
CONTRACTION_SUFFIXES = ("n't", "'re", "'ll", "'ve", "'s", "'d", "'m")


def normalize(raw_line: str) -> list:
    """Lowercase, split on whitespace, then split clitic contractions."""
    out = []
    for tok in raw_line.lower().split():
        for suffix in CONTRACTION_SUFFIXES:
            if tok.endswith(suffix) and len(tok) > len(suffix):
                out.append(tok[: -len(suffix)])
                out.append(suffix)
                break
        else:
            out.append(tok)
    return out


@dataclass(frozen=True)
class Document:
    id: str
    utterances: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "utterances", tuple(tuple(u) for u in self.utterances)
        )

    @property
    def n_tokens(self) -> int:
        return sum(len(u) for u in self.utterances)

    def tokens(self):
        for utt in self.utterances:
            yield from utt


def read_corpus_dir(path) -> list:
    """One Document per file (sorted by name), one utterance per line."""
    path = Path(path)
    docs = []
    for f in sorted(p for p in path.iterdir() if p.is_file()):
        utts = [normalize(line) for line in f.read_text().splitlines()]
        docs.append(Document(id=f.name, utterances=[u for u in utts if u]))
    if not docs:
        raise FileNotFoundError(f"no document files in {path}")
    return docs


def split_corpus(docs, ratios=(0.90, 0.05, 0.05), seed=0):
    """Assign whole documents to (train, valid, test) by token budget.

    Documents are randomly permuted, then each partition is filled
    greedily until its share of the total token count is reached.  Warns
    when the realized fractions land more than 2 points off target, which
    happens for corpora with too few or too lopsided documents.
    """
    docs = list(docs)
    if len(docs) < 3:
        raise ValueError(f"need at least 3 documents to split, got {len(docs)}")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise ValueError(f"ratios must be 3 positive numbers summing to 1: {ratios}")
    order = list(range(len(docs)))
    random.Random(seed).shuffle(order)
    total = sum(d.n_tokens for d in docs)
    assignment = {}
    part = 0
    filled = 0
    for rank, i in enumerate(order):
        remaining_docs = len(order) - rank
        remaining_parts = 2 - part
        # never starve later partitions of their minimum one document
        if part < 2 and (filled >= ratios[part] * total or remaining_docs <= remaining_parts):
            part += 1
            filled = 0
        assignment[i] = part
        filled += docs[i].n_tokens
    parts = ([], [], [])
    for i, doc in enumerate(docs):
        parts[assignment[i]].append(doc)
    realized = [sum(d.n_tokens for d in p) / total for p in parts]
    if any(abs(r - t) > 0.02 for r, t in zip(realized, ratios)):
        warnings.warn(
            f"realized token fractions {[round(r, 4) for r in realized]} "
            f"deviate more than 2 points from {ratios}; corpus may be too small",
            stacklevel=2,
        )
    return parts


def split_manifest(train, valid, test) -> dict:
    """JSON-ready record of the document assignment and realized fractions."""
    total = sum(d.n_tokens for part in (train, valid, test) for d in part)
    names = ("train", "valid", "test")
    return {
        "documents": {
            d.id: name for name, part in zip(names, (train, valid, test)) for d in part
        },
        "token_counts": {
            name: sum(d.n_tokens for d in part)
            for name, part in zip(names, (train, valid, test))
        },
        "token_fractions": {
            name: sum(d.n_tokens for d in part) / total
            for name, part in zip(names, (train, valid, test))
        },
    }


@dataclass(frozen=True)
class Vocabulary:
    """Dense token ids with ``<unk>``/``<eos>`` always present.

    Tokens seen fewer than ``min_count`` times in training text are not
    mapped; ``apply_unk`` sends them to ``<unk>``.
    """

    token_to_id: dict
    counts: dict
    min_count: int

    def __post_init__(self):
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("vocabulary ids must be dense from 0")
        for special in (UNK, EOS):
            if special not in self.token_to_id:
                raise ValueError(f"vocabulary must contain {special}")

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token) -> bool:
        return token in self.token_to_id

    @property
    def id_to_token(self) -> list:
        out = [None] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            out[i] = tok
        return out

    def id(self, token) -> int:
        return self.token_to_id.get(token, self.token_to_id[UNK])

    def encode(self, tokens) -> list:
        unk = self.token_to_id[UNK]
        return [self.token_to_id.get(t, unk) for t in tokens]

    def decode(self, ids) -> list:
        rev = self.id_to_token
        return [rev[i] for i in ids]


def build_vocab(train_docs, min_count=3) -> Vocabulary:
    """Count train tokens and keep those seen at least ``min_count`` times."""
    counts = collections.Counter()
    for doc in train_docs:
        counts.update(doc.tokens())
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count and t not in (UNK, EOS)),
        key=lambda t: (-counts[t], t),
    )
    token_to_id = {UNK: 0, EOS: 1}
    for tok in kept:
        token_to_id[tok] = len(token_to_id)
    return Vocabulary(
        token_to_id=token_to_id,
        counts={t: counts[t] for t in kept},
        min_count=min_count,
    )


def apply_unk(tokens, vocab: Vocabulary) -> list:
    return [t if t in vocab.token_to_id else UNK for t in tokens]


def replacement_rate(docs, vocab: Vocabulary) -> float:
    """Fraction of tokens in ``docs`` that apply_unk would replace."""
    total = replaced = 0
    for doc in docs:
        for tok in doc.tokens():
            total += 1
            replaced += tok not in vocab.token_to_id
    return replaced / total if total else 0.0


def save_vocab(vocab: Vocabulary, path) -> None:
    lines = []
    for tok in vocab.id_to_token:
        count = vocab.counts.get(tok, 0)
        lines.append(f"{tok}\t{vocab.token_to_id[tok]}\t{count}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_vocab(path) -> Vocabulary:
    token_to_id = {}
    counts = {}
    for line in Path(path).read_text().splitlines():
        tok, idx, count = line.split("\t")
        token_to_id[tok] = int(idx)
        if tok not in (UNK, EOS):
            counts[tok] = int(count)
    return Vocabulary(token_to_id=token_to_id, counts=counts, min_count=3)


def write_token_file(path, utterances) -> None:
    """One utterance per line, tokens space-separated."""
    with open(path, "w") as f:
        for utt in utterances:
            f.write(" ".join(utt) + "\n")


def read_token_file(path) -> list:
    return [line.split() for line in Path(path).read_text().splitlines() if line.split()]
