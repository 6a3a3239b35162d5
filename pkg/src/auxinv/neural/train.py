"""SGD training on contiguous token streams.

The corpus is one long id stream (utterances delimited by ``<eos>``, in
document order, so context crosses utterance boundaries).  ``batchify``
splits it into ``batch_size`` parallel rows; windows of ``bptt`` tokens
slide along the rows, with LSTM state carried (detached) between windows
and the Transformer re-positioned per window.

One epoch = one pass over the windows.  After each epoch, validation
perplexity either improves or the learning rate is divided by the anneal
factor; the returned model carries the best-validation parameters.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from ..corpus import EOS
from .models import NeuralLM, NeuralLMConfig
from . import tensor as T


def encode_stream(utterances, vocab) -> np.ndarray:
    """Flatten utterances into one id stream with ``<eos>`` after each."""
    eos = vocab.token_to_id[EOS]
    ids = []
    for utt in utterances:
        ids.extend(vocab.id(t) for t in utt)
        ids.append(eos)
    return np.asarray(ids, dtype=np.int64)


def batchify(stream: np.ndarray, batch_size: int) -> np.ndarray:
    """Reshape a stream into (batch_size, columns), dropping the tail."""
    stream = np.asarray(stream)
    columns = len(stream) // batch_size
    if columns < 2:
        raise ValueError(
            f"stream of {len(stream)} tokens is too short for "
            f"batch size {batch_size}"
        )
    return stream[: batch_size * columns].reshape(batch_size, columns)


def _windows(data: np.ndarray, bptt: int):
    columns = data.shape[1]
    for i in range(0, columns - 1, bptt):
        width = min(bptt, columns - 1 - i)
        yield data[:, i : i + width], data[:, i + 1 : i + 1 + width]


def _run_stream(model: NeuralLM, data: np.ndarray, train: bool,
                rng=None, lr: float = 0.0):
    """One pass over the stream; returns (mean loss, token count)."""
    cfg = model.config
    state = model.initial_state(data.shape[0])
    total_logprob = 0.0
    total_tokens = 0
    params = model.parameters()
    for step, (x, y) in enumerate(_windows(data, cfg.bptt)):
        logits, state = model.forward(x, state=state, train=train, rng=rng)
        flat = T.reshape(logits, (x.size, len(model.vocab)))
        loss, picked = T.softmax_cross_entropy(flat, y.reshape(-1))
        total_logprob += float(picked.sum())
        total_tokens += picked.size
        if train:
            model.zero_grad()
            loss.backward()
            norm = T.clip_gradients(params, cfg.clip)
            if not math.isfinite(norm):
                raise T.NumericFault(
                    f"gradient norm {norm} at step {step}"
                )
            for p in params:
                if p.grad is not None:
                    p.data -= lr * p.grad
            for p in params:
                if not np.isfinite(p.data).all():
                    raise T.NumericFault(
                        f"non-finite parameter after step {step} "
                        f"(lr={lr}, grad norm={norm})"
                    )
    return -total_logprob / max(total_tokens, 1), total_tokens


def evaluate_stream(model: NeuralLM, stream: np.ndarray,
                    batch_size=None) -> float:
    """Perplexity of a stream under the model (no dropout, fresh state)."""
    data = batchify(stream, batch_size or model.config.batch_size)
    mean_loss, _ = _run_stream(model, data, train=False)
    return math.exp(mean_loss)


def train_lm(config: NeuralLMConfig, vocab, train_stream, valid_stream,
             log_path=None, progress=None) -> NeuralLM:
    """Train from scratch; returns the model at its best validation point.

    ``train_stream``/``valid_stream`` are id arrays from
    ``encode_stream``.  ``progress`` is an optional callable receiving the
    per-epoch log row.  Training is single threaded and fully determined
    by ``config.seed``.
    """
    init_seed, drop_seed = [
        s.generate_state(1)[0]
        for s in np.random.SeedSequence(config.seed).spawn(2)
    ]
    model = NeuralLM(config, vocab, init_seed=init_seed)
    rng = np.random.default_rng(drop_seed)
    train_data = batchify(train_stream, config.batch_size)
    valid_data = batchify(valid_stream, config.batch_size)
    lr = config.lr
    best_ppl = math.inf
    best_params = None
    rows = []
    try:
        for epoch in range(1, config.epochs + 1):
            mean_loss, _ = _run_stream(model, train_data, train=True,
                                       rng=rng, lr=lr)
            valid_loss, _ = _run_stream(model, valid_data, train=False)
            row = {
                "epoch": epoch,
                "train_ppl": math.exp(mean_loss),
                "valid_ppl": math.exp(valid_loss),
                "lr": lr,
            }
            rows.append(row)
            if progress is not None:
                progress(row)
            if row["valid_ppl"] < best_ppl:
                best_ppl = row["valid_ppl"]
                best_params = {
                    k: p.data.copy() for k, p in model.params.items()
                }
            else:
                lr /= config.anneal
    except T.NumericFault as fault:
        raise T.NumericFault(
            f"training aborted: {fault}; config={config}, "
            f"completed epochs={len(rows)}"
        ) from fault
    finally:
        if log_path is not None and rows:
            with open(log_path, "w", newline="") as fh:
                writer = csv.DictWriter(
                    fh, fieldnames=["epoch", "train_ppl", "valid_ppl", "lr"]
                )
                writer.writeheader()
                writer.writerows(rows)
    if best_params is not None:
        for k, data in best_params.items():
            model.params[k] = T.Tensor(data)
    model.log = rows
    return model
