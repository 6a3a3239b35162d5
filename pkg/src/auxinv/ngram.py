"""Interpolated modified Kneser-Ney n-gram language models.

Counting conventions
--------------------
Each training utterance is padded with ``order - 1`` start symbols ``<s>``
and, by default, terminated with ``<eos>``.  ``<s>`` is an internal context
symbol: it is never predicted and never part of the vocabulary.  ``<eos>``
is an ordinary vocabulary entry and is predicted.

Counts at the highest order are raw occurrence counts.  Counts at lower
orders are continuation counts (the number of distinct single-token left
extensions seen one order up), except that n-grams beginning with ``<s>``
keep raw counts, since nothing can ever precede ``<s>``.

Discounts
---------
Per order, with n_k the number of n-grams whose count is exactly k:

    Y   = n1 / (n1 + 2 n2)
    D_k = k - (k + 1) * Y * n_{k+1} / n_k        for k = 1, 2, 3

D_3 applies to all counts >= 3.  When the count-of-counts are degenerate
(any of n1..n4 is zero, or a discount falls outside (0, k]), the order
falls back to a fixed D = 0.75 for all three slots and a warning is
emitted.  The ``plain`` variant uses the single discount Y everywhere.

Probabilities interpolate down to a uniform 1/|V| floor below unigrams, so
every conditional distribution over the vocabulary sums to one exactly.
After training, probabilities and backoff weights are precomputed into
longest-suffix-match tables, making queries dictionary lookups.
"""

from __future__ import annotations

import io
import math
import struct
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

from .corpus import EOS, UNK, Vocabulary
from .lm import LanguageModel

BOS = "<s>"

_MAGIC = b"KNLM"
_FORMAT_VERSION = 1
_FALLBACK_DISCOUNT = 0.75


class NGramError(ValueError):
    """Raised for unusable training input or corrupt model files."""


@dataclass(frozen=True)
class ClosedVocab(Vocabulary):
    """Vocabulary over exactly the given tokens, with no special entries.

    For closed-world models over synthetic languages where every token is
    known in advance; out-of-vocabulary lookups are errors rather than
    ``<unk>`` mappings.
    """

    def __post_init__(self):
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("vocabulary ids must be dense from 0")

    def id(self, token) -> int:
        return self.token_to_id[token]

    def encode(self, tokens) -> list:
        return [self.token_to_id[t] for t in tokens]


def closed_vocab(tokens) -> ClosedVocab:
    """ClosedVocab over the token types in ``tokens``, frequent first."""
    counts = defaultdict(int)
    for tok in tokens:
        counts[tok] += 1
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return ClosedVocab(
        token_to_id={t: i for i, t in enumerate(ordered)},
        counts=dict(counts),
        min_count=1,
    )


def _count_tables(utterances, order, include_eos):
    """Raw counts for every order, windows ending at each predicted token."""
    tables = [None] + [defaultdict(int) for _ in range(order)]
    pad = (BOS,) * (order - 1)
    for utt in utterances:
        toks = tuple(utt) + ((EOS,) if include_eos else ())
        if not toks:
            continue
        if BOS in toks:
            raise NGramError("utterances must not contain the reserved token '<s>'")
        padded = pad + toks
        for i in range(order - 1, len(padded)):
            for k in range(1, order + 1):
                tables[k][padded[i - k + 1 : i + 1]] += 1
    return tables


def _apply_continuation_counts(tables, order):
    """Replace lower-order counts by continuation counts (``<s>`` rows keep raw)."""
    for k in range(order - 1, 0, -1):
        cont = defaultdict(int)
        for gram, c in tables[k + 1].items():
            if c > 0:
                cont[gram[1:]] += 1
        for gram in list(tables[k]):
            if gram[0] != BOS:
                tables[k][gram] = cont.get(gram, 0)


def _estimate_discounts(counts, order_label, variant):
    """(D1, D2, D3) from count-of-counts, with the degenerate fallback."""
    n = defaultdict(int)
    for c in counts.values():
        if 1 <= c <= 4:
            n[c] += 1
    if any(n[k] == 0 for k in (1, 2, 3, 4)):
        warnings.warn(
            f"degenerate count-of-counts at order {order_label}; "
            f"falling back to fixed discount {_FALLBACK_DISCOUNT}"
        )
        return (_FALLBACK_DISCOUNT,) * 3
    y = n[1] / (n[1] + 2 * n[2])
    if variant == "plain":
        return (y, y, y)
    ds = tuple(k - (k + 1) * y * n[k + 1] / n[k] for k in (1, 2, 3))
    if any(not (0.0 < ds[k - 1] <= k) for k in (1, 2, 3)):
        warnings.warn(
            f"out-of-range discounts at order {order_label}; "
            f"falling back to fixed discount {_FALLBACK_DISCOUNT}"
        )
        return (_FALLBACK_DISCOUNT,) * 3
    return ds


def _discount_for(count, discounts):
    if count <= 0:
        return 0.0
    return discounts[min(count, 3) - 1]


@dataclass
class NGramModel(LanguageModel):
    """Precomputed interpolated model queried by longest suffix match.

    ``prob`` maps each seen n-gram (any order) to its full interpolated
    ln p(last token | preceding); ``backoff`` maps each seen context,
    including the empty one, to its ln backoff weight.
    """

    order: int
    vocab: Vocabulary
    variant: str
    discounts: dict
    prob: dict
    backoff: dict
    include_eos: bool = True
    counts: dict = field(default=None, repr=False, compare=False)

    def _context_tuple(self, context):
        if self.order == 1:
            return ()
        ctx = (BOS,) * (self.order - 1) + tuple(context)
        return ctx[len(ctx) - (self.order - 1) :]

    def logprob(self, context, token) -> float:
        if token not in self.vocab.token_to_id:
            if UNK not in self.vocab.token_to_id:
                raise NGramError(
                    f"token {token!r} outside a closed vocabulary"
                )
            token = UNK
        sub = self._context_tuple(context)
        acc = 0.0
        while sub:
            gram = sub + (token,)
            if gram in self.prob:
                return acc + self.prob[gram]
            acc += self.backoff.get(sub, 0.0)
            sub = sub[1:]
        if (token,) in self.prob:
            return acc + self.prob[(token,)]
        return acc + self.backoff.get((), 0.0) - math.log(len(self.vocab))

    def perplexity(self, utterances, include_eos=True) -> float:
        """exp of the mean negative ln p over every scored token."""
        total = 0.0
        n = 0
        for utt in utterances:
            lps = self.sentence_logprobs(utt, include_eos=include_eos)
            total += sum(lps)
            n += len(lps)
        if n == 0:
            raise NGramError("cannot compute perplexity of an empty corpus")
        return math.exp(-total / n)

    # -- serialization ----------------------------------------------------

    def dump(self, fh) -> None:
        """Versioned binary format; floats stored as raw IEEE-754 bytes."""
        w = fh.write
        w(_MAGIC)
        w(struct.pack("<HHBBI", _FORMAT_VERSION, self.order,
                      int(self.include_eos),
                      int(isinstance(self.vocab, ClosedVocab)),
                      self.vocab.min_count))
        variant = self.variant.encode()
        w(struct.pack("<H", len(variant)))
        w(variant)
        toks = self.vocab.id_to_token
        w(struct.pack("<I", len(toks)))
        for tok in toks:
            enc = tok.encode()
            w(struct.pack("<H", len(enc)))
            w(enc)
        counted = sorted(self.vocab.counts.items(),
                         key=lambda kv: self.vocab.token_to_id[kv[0]])
        w(struct.pack("<I", len(counted)))
        for tok, count in counted:
            w(struct.pack("<IQ", self.vocab.token_to_id[tok], count))
        sym_ids = {tok: i for i, tok in enumerate(toks)}
        sym_ids[BOS] = len(toks)
        w(struct.pack("<H", len(self.discounts)))
        for k in sorted(self.discounts):
            w(struct.pack("<H3d", k, *self.discounts[k]))
        for table in (self.prob, self.backoff):
            w(struct.pack("<Q", len(table)))
            for gram in sorted(table):
                w(struct.pack("<B", len(gram)))
                if gram:
                    w(struct.pack(f"<{len(gram)}I", *(sym_ids[s] for s in gram)))
                w(struct.pack("<d", table[gram]))

    @classmethod
    def load(cls, fh) -> "NGramModel":
        buf = io.BytesIO(fh.read())

        def take(fmt):
            size = struct.calcsize(fmt)
            raw = buf.read(size)
            if len(raw) != size:
                raise NGramError("truncated n-gram model file")
            return struct.unpack(fmt, raw)

        if buf.read(4) != _MAGIC:
            raise NGramError("not an n-gram model file")
        version, order, include_eos, closed, min_count = take("<HHBBI")
        if version != _FORMAT_VERSION:
            raise NGramError(f"unsupported model format version {version}")
        (vlen,) = take("<H")
        variant = buf.read(vlen).decode()
        (ntok,) = take("<I")
        toks = []
        for _ in range(ntok):
            (tlen,) = take("<H")
            toks.append(buf.read(tlen).decode())
        (ncounts,) = take("<I")
        counts = {}
        for _ in range(ncounts):
            idx, count = take("<IQ")
            counts[toks[idx]] = count
        vocab_cls = ClosedVocab if closed else Vocabulary
        vocab = vocab_cls(
            token_to_id={t: i for i, t in enumerate(toks)},
            counts=counts,
            min_count=min_count,
        )
        symbols = toks + [BOS]
        (nd,) = take("<H")
        discounts = {}
        for _ in range(nd):
            k, d1, d2, d3 = take("<H3d")
            discounts[k] = (d1, d2, d3)
        tables = []
        for _ in range(2):
            (n,) = take("<Q")
            table = {}
            for _ in range(n):
                (glen,) = take("<B")
                ids = take(f"<{glen}I") if glen else ()
                (val,) = take("<d")
                table[tuple(symbols[i] for i in ids)] = val
            tables.append(table)
        return cls(
            order=order,
            vocab=vocab,
            variant=variant,
            discounts=discounts,
            prob=tables[0],
            backoff=tables[1],
            include_eos=bool(include_eos),
        )

    def dumps(self) -> bytes:
        buf = io.BytesIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, data: bytes) -> "NGramModel":
        return cls.load(io.BytesIO(data))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            self.dump(fh)

    @classmethod
    def from_file(cls, path) -> "NGramModel":
        with open(path, "rb") as fh:
            return cls.load(fh)

    def export_text(self) -> str:
        """Plain-text table dump: per order, ``ln_prob gram [ln_backoff]``."""
        lines = [f"\\data\\ order={self.order} vocab={len(self.vocab)}"]
        by_order = defaultdict(list)
        for gram in self.prob:
            by_order[len(gram)].append(gram)
        for k in range(1, self.order + 1):
            lines.append(f"\\{k}-grams:")
            for gram in sorted(by_order.get(k, ())):
                parts = [f"{self.prob[gram]:.10f}", " ".join(gram)]
                if gram in self.backoff:
                    parts.append(f"{self.backoff[gram]:.10f}")
                lines.append("\t".join(parts))
        lines.append("\\end\\")
        return "\n".join(lines) + "\n"


def _vocab_from_corpus(utterances):
    """Vocabulary of every seen type, ordered like the corpus builder."""
    counts = defaultdict(int)
    for utt in utterances:
        for tok in utt:
            counts[tok] += 1
    kept = sorted(
        (t for t in counts if t not in (UNK, EOS)),
        key=lambda t: (-counts[t], t),
    )
    token_to_id = {UNK: 0, EOS: 1}
    for tok in kept:
        token_to_id[tok] = len(token_to_id)
    return Vocabulary(
        token_to_id=token_to_id,
        counts={t: counts[t] for t in kept},
        min_count=1,
    )


def train_ngram(utterances, order, vocab=None, variant="modified",
                include_eos=True, keep_counts=True) -> NGramModel:
    """Count, discount, and precompute the interpolated tables.

    ``utterances`` is a sequence of token lists with the vocabulary already
    applied; tokens are counted as given.  When ``vocab`` is omitted, one
    is derived from the corpus (every seen type kept).  ``variant`` is
    ``"modified"`` (three discount slots) or ``"plain"`` (single discount).
    ``keep_counts=False`` drops the raw count tables after training to
    save memory; they are never serialized either way.
    """
    if order < 1:
        raise NGramError("order must be at least 1")
    if variant not in ("modified", "plain"):
        raise NGramError(f"unknown Kneser-Ney variant {variant!r}")
    utterances = [list(u) for u in utterances]
    if not any(utterances):
        raise NGramError("training corpus is empty")
    if vocab is None:
        vocab = _vocab_from_corpus(utterances)
    if include_eos and EOS not in vocab.token_to_id:
        raise NGramError("include_eos requires <eos> in the vocabulary")

    tables = _count_tables(utterances, order, include_eos)
    _apply_continuation_counts(tables, order)

    discounts = {
        k: _estimate_discounts(tables[k], k, variant) for k in range(1, order + 1)
    }

    # Context aggregates per order: total mass and discounted mass.
    # Iteration is sorted so float accumulation order, and therefore the
    # serialized model, is independent of utterance order.
    totals = [None] + [defaultdict(int) for _ in range(order)]
    dmass = [None] + [defaultdict(float) for _ in range(order)]
    for k in range(1, order + 1):
        for gram, c in sorted(tables[k].items()):
            if c <= 0:
                continue
            ctx = gram[:-1]
            totals[k][ctx] += c
            dmass[k][ctx] += _discount_for(c, discounts[k])

    nvocab = len(vocab)
    prob = {}
    backoff = {}

    uni_total = totals[1].get((), 0)
    if uni_total <= 0:
        raise NGramError("no unigram mass; corpus appears empty")
    gamma1 = dmass[1][()] / uni_total
    backoff[()] = math.log(gamma1)
    for gram, c in sorted(tables[1].items()):
        if c > 0:
            p = (c - _discount_for(c, discounts[1])) / uni_total + gamma1 / nvocab
            prob[gram] = math.log(p)

    def interp_prob(gram):
        """Interpolated probability of gram's last token given the rest."""
        if len(gram) == 1:
            c = tables[1].get(gram, 0)
            base = max(c - _discount_for(c, discounts[1]), 0.0) / uni_total
            return base + gamma1 / nvocab
        k = len(gram)
        ctx = gram[:-1]
        tot = totals[k].get(ctx, 0)
        lower = interp_prob(gram[1:])
        if tot <= 0:
            return lower
        c = tables[k].get(gram, 0)
        gamma = dmass[k][ctx] / tot
        return max(c - _discount_for(c, discounts[k]), 0.0) / tot + gamma * lower

    for k in range(2, order + 1):
        for ctx, tot in totals[k].items():
            if tot > 0:
                backoff[ctx] = math.log(dmass[k][ctx] / tot)
        for gram, c in sorted(tables[k].items()):
            if c > 0:
                prob[gram] = math.log(interp_prob(gram))

    return NGramModel(
        order=order,
        vocab=vocab,
        variant=variant,
        discounts=discounts,
        prob=prob,
        backoff=backoff,
        include_eos=include_eos,
        counts={k: dict(tables[k]) for k in range(1, order + 1)}
        if keep_counts else None,
    )
