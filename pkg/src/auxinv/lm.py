"""Shared language-model interface for scoring and generation.

Every model exposes ``logprob(context, token)`` in natural log, where
``context`` is the full token history of the current utterance (the model
applies its own beginning-of-sequence convention internally).  Sentence
scoring always starts from a fresh context, so a sentence's score never
depends on what else sits in the same evaluation batch.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .corpus import EOS, Vocabulary


class LanguageModel:
    """Interface: subclasses provide ``vocab`` and ``logprob``."""

    vocab: Vocabulary

    def logprob(self, context, token) -> float:
        raise NotImplementedError

    def sentence_logprobs(self, tokens, include_eos=False) -> list:
        """Per-token ln p, conditioning on the in-sentence prefix only."""
        tokens = list(tokens)
        out = [self.logprob(tokens[:i], tokens[i]) for i in range(len(tokens))]
        if include_eos:
            out.append(self.logprob(tokens, EOS))
        return out

    def predict_next(self, prefix) -> np.ndarray:
        """Distribution over the vocabulary (by token id) after ``prefix``.

        Generic fallback queries logprob per vocabulary entry; model
        classes with batched forward passes override this.
        """
        logs = np.array(
            [self.logprob(prefix, tok) for tok in self.vocab.id_to_token]
        )
        return np.exp(logs)

    def next_logprob_rows(self, tokens) -> np.ndarray:
        """ln-p row after every prefix of ``tokens``, empty prefix included.

        Shape (len + 1, |V|): row i conditions on the first i tokens.  The
        generic fallback loops ``predict_next``; sequence models override
        with a single forward pass.
        """
        tokens = list(tokens)
        with np.errstate(divide="ignore"):
            return np.log(
                [self.predict_next(tokens[:i]) for i in range(len(tokens) + 1)]
            )


class UniformLM(LanguageModel):
    """Assigns 1/|V| everywhere; an analytic fixture for metric tests."""

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def logprob(self, context, token) -> float:
        return -math.log(len(self.vocab))


def generate_text(model: LanguageModel, prefix, seed, length, temperature=1.0):
    """Ancestral sampling: draw, append, repeat; ``temperature=0`` = argmax.

    Returns the ``length`` newly sampled tokens (prefix excluded).  The
    distribution at each step is whatever ``predict_next`` reports, so any
    LanguageModel can generate.
    """
    rng = random.Random(seed)
    toks = list(prefix)
    out = []
    id_to_token = model.vocab.id_to_token
    for _ in range(length):
        probs = np.asarray(model.predict_next(toks), dtype=float)
        if temperature == 0:
            idx = int(np.argmax(probs))
        else:
            if temperature != 1.0:
                logits = np.log(np.maximum(probs, 1e-300)) / temperature
                logits -= logits.max()
                probs = np.exp(logits)
            probs = probs / probs.sum()
            r = rng.random()
            idx = int(np.searchsorted(np.cumsum(probs), r))
            idx = min(idx, len(probs) - 1)
        tok = id_to_token[idx]
        out.append(tok)
        toks.append(tok)
    return out
