"""LSTM and decoder-only Transformer language models.

Both architectures share the flat parameter-dict layout, the scoring
interface, and the checkpoint format.  The beginning-of-sequence symbol
is ``<eos>``: training streams delimit utterances with ``<eos>``, so the
model's post-``<eos>`` distribution is exactly its sentence-initial one,
and scoring prepends a single ``<eos>`` before conditioning.
"""

from __future__ import annotations

import io
import json
import struct
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..corpus import EOS, Vocabulary
from ..lm import LanguageModel
from ..ngram import ClosedVocab
from . import layers as L
from . import tensor as T

ARCHITECTURES = ("lstm", "transformer")

_MAGIC = b"AXNN"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NeuralLMConfig:
    architecture: str
    layers: int = 2
    hidden: int = 128
    embedding: int = 128
    heads: int = 4
    context: int = 128
    dropout: float = 0.2
    lr: float = None
    batch_size: int = 20
    bptt: int = 35
    clip: float = 0.25
    seed: int = 0
    epochs: int = 10
    anneal: float = 4.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        for name in ("layers", "hidden", "embedding", "heads", "context",
                     "batch_size", "bptt", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.hidden % self.heads:
            raise ValueError("hidden size must be divisible by heads")
        if self.anneal <= 1.0:
            raise ValueError("anneal factor must exceed 1")
        if self.clip <= 0:
            raise ValueError("clip norm must be positive")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")
        if self.architecture == "transformer":
            if self.embedding != self.hidden:
                raise ValueError(
                    "transformer residual stream needs embedding == hidden"
                )
            if self.bptt > self.context:
                raise ValueError("bptt window cannot exceed context length")
        if self.lr is None:
            object.__setattr__(
                self, "lr", 10.0 if self.architecture == "lstm" else 5.0
            )
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32


class NeuralLM(LanguageModel):
    """A trained (or trainable) neural LM over a fixed vocabulary."""

    def __init__(self, config: NeuralLMConfig, vocab: Vocabulary,
                 init_seed=None):
        self.config = config
        self.vocab = vocab
        self.log = []
        dtype = config.np_dtype()
        rng = np.random.default_rng(
            config.seed if init_seed is None else init_seed
        )
        params = {}
        nvocab = len(vocab)
        params["emb"] = L.uniform_param(rng, (nvocab, config.embedding), dtype)
        if config.architecture == "lstm":
            for i in range(config.layers):
                n_in = config.embedding if i == 0 else config.hidden
                L.init_lstm_layer(params, rng, f"lstm{i}", n_in,
                                  config.hidden, dtype)
        else:
            params["pos"] = L.uniform_param(
                rng, (config.context, config.embedding), dtype
            )
            for i in range(config.layers):
                L.init_transformer_block(params, rng, f"block{i}",
                                         config.hidden, dtype)
        L.init_linear(params, rng, "out", config.hidden, nvocab, dtype)
        self.params = params
        self._mask = (
            L.causal_mask(config.context, dtype)
            if config.architecture == "transformer" else None
        )

    # -- forward ------------------------------------------------------------

    def parameters(self):
        return [self.params[k] for k in sorted(self.params)]

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def initial_state(self, batch_size: int):
        if self.config.architecture != "lstm":
            return None
        dtype = self.config.np_dtype()
        return [
            (np.zeros((batch_size, self.config.hidden), dtype=dtype),
             np.zeros((batch_size, self.config.hidden), dtype=dtype))
            for _ in range(self.config.layers)
        ]

    def forward(self, ids, state=None, train=False, rng=None):
        """Logits tensor of shape (batch, time, vocab) plus carried state.

        ``ids`` is an integer array (batch, time).  For the LSTM, ``state``
        is the per-layer (h, c) carry as plain arrays, detached across
        calls.  The Transformer is stateless and positions are window
        local; callers keep windows within the configured context.
        """
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise T.ShapeError("forward wants (batch, time) token ids")
        cfg = self.config
        drop = cfg.dropout if train else 0.0
        batch, time = ids.shape
        x = T.embedding(self.params["emb"], ids)
        x = T.dropout(x, drop, rng, train)
        if cfg.architecture == "lstm":
            if state is None:
                state = self.initial_state(batch)
            hs = [T.Tensor(h) for h, _ in state]
            cs = [T.Tensor(c) for _, c in state]
            outputs = []
            for t in range(time):
                inp = x[:, t]
                for i in range(cfg.layers):
                    h, c = L.lstm_step(self.params, f"lstm{i}", inp, hs[i], cs[i])
                    hs[i], cs[i] = h, c
                    inp = T.dropout(h, drop, rng, train) if i < cfg.layers - 1 else h
                outputs.append(T.reshape(inp, (batch, 1, cfg.hidden)))
            feats = T.concat(outputs, axis=1)
            new_state = [
                (hs[i].data.copy(), cs[i].data.copy())
                for i in range(cfg.layers)
            ]
        else:
            if time > cfg.context:
                raise T.ShapeError(
                    f"window of {time} tokens exceeds context {cfg.context}"
                )
            x = T.add(x, self.params["pos"][:time])
            for i in range(cfg.layers):
                x = L.transformer_block(
                    self.params, f"block{i}", x, cfg.heads,
                    self._mask, drop, rng, train,
                )
            feats = x
            new_state = None
        feats = T.dropout(feats, drop, rng, train)
        flat = T.reshape(feats, (batch * time, cfg.hidden))
        logits = L.linear(flat, self.params, "out")
        return T.reshape(logits, (batch, time, len(self.vocab))), new_state

    # -- scoring --------------------------------------------------------------

    def _bos_id(self) -> int:
        if EOS not in self.vocab.token_to_id:
            raise ValueError("neural scoring needs <eos> in the vocabulary")
        return self.vocab.token_to_id[EOS]

    def _encode(self, tokens):
        return [self.vocab.id(t) for t in tokens]

    def _window_logprob_rows(self, ids):
        """ln p rows for each next-token position of one id sequence.

        Sequences longer than the Transformer context are scored through a
        sliding window, re-conditioning on the trailing context only.
        """
        cfg = self.config
        n = len(ids)
        if cfg.architecture == "lstm" or n <= cfg.context:
            logits, _ = self.forward(np.asarray([ids]), train=False)
            return T.log_softmax_rows(logits.data[0])
        warnings.warn(
            f"sequence of {n} tokens exceeds context {cfg.context}; "
            "scoring with a sliding window"
        )
        rows = np.empty((n, len(self.vocab)), dtype=np.float64)
        logits, _ = self.forward(np.asarray([ids[: cfg.context]]), train=False)
        rows[: cfg.context] = T.log_softmax_rows(logits.data[0])
        for pos in range(cfg.context, n):
            window = ids[pos - cfg.context + 1 : pos + 1]
            logits, _ = self.forward(np.asarray([window]), train=False)
            rows[pos] = T.log_softmax_rows(logits.data[0, -1])
        return rows

    def sentence_logprobs(self, tokens, include_eos=False) -> list:
        ids = self._encode(tokens)
        targets = ids + ([self._bos_id()] if include_eos else [])
        seq = [self._bos_id()] + ids
        rows = self._window_logprob_rows(seq)
        return [float(rows[i, tgt]) for i, tgt in enumerate(targets)]

    def score_sentences(self, sentences, include_eos=False) -> list:
        """Batched ``sentence_logprobs`` over many sentences.

        Rows are padded with ``<eos>`` to a common length; since logits at
        a position depend only on that row's earlier tokens, padding never
        changes any returned score.
        """
        if not sentences:
            return []
        bos = self._bos_id()
        encoded = [self._encode(s) for s in sentences]
        lengths = [len(e) + (1 if include_eos else 0) for e in encoded]
        width = 1 + max(lengths)
        cfg = self.config
        if cfg.architecture == "transformer" and width > cfg.context:
            return [
                self.sentence_logprobs(s, include_eos=include_eos)
                for s in sentences
            ]
        ids = np.full((len(encoded), width), bos, dtype=np.int64)
        for r, e in enumerate(encoded):
            ids[r, 1 : 1 + len(e)] = e
        logits, _ = self.forward(ids, train=False)
        out = []
        for r, e in enumerate(encoded):
            rows = T.log_softmax_rows(logits.data[r])
            targets = e + ([bos] if include_eos else [])
            out.append([float(rows[i, t]) for i, t in enumerate(targets)])
        return out

    def logprob(self, context, token) -> float:
        ids = self._encode(list(context))
        seq = [self._bos_id()] + ids
        rows = self._window_logprob_rows(seq)
        return float(rows[-1, self.vocab.id(token)])

    def predict_next(self, prefix) -> np.ndarray:
        seq = [self._bos_id()] + self._encode(list(prefix))
        rows = self._window_logprob_rows(seq)
        return np.exp(rows[-1])

    def next_logprob_rows(self, tokens) -> np.ndarray:
        seq = [self._bos_id()] + self._encode(list(tokens))
        return self._window_logprob_rows(seq)

    # -- checkpoints ------------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            self.dump(fh)

    def dump(self, fh) -> None:
        cfg_blob = json.dumps(asdict(self.config), sort_keys=True).encode()
        vocab_blob = json.dumps(
            {
                "tokens": self.vocab.id_to_token,
                "counts": self.vocab.counts,
                "min_count": self.vocab.min_count,
                "closed": isinstance(self.vocab, ClosedVocab),
            },
            sort_keys=True,
        ).encode()
        log_blob = json.dumps(self.log, sort_keys=True).encode()
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _FORMAT_VERSION))
        for blob in (cfg_blob, vocab_blob, log_blob):
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
        names = sorted(self.params)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = self.params[name].data
            enc = name.encode()
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            dt = arr.dtype.str.encode()
            fh.write(struct.pack("<H", len(dt)))
            fh.write(dt)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())

    @classmethod
    def from_file(cls, path) -> "NeuralLM":
        with open(path, "rb") as fh:
            return cls.load(fh)

    @classmethod
    def load(cls, fh) -> "NeuralLM":
        buf = io.BytesIO(fh.read())

        def take(fmt):
            size = struct.calcsize(fmt)
            raw = buf.read(size)
            if len(raw) != size:
                raise ValueError("truncated checkpoint file")
            return struct.unpack(fmt, raw)

        if buf.read(4) != _MAGIC:
            raise ValueError("not a neural checkpoint file")
        (version,) = take("<H")
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        blobs = []
        for _ in range(3):
            (n,) = take("<I")
            blobs.append(buf.read(n))
        config = NeuralLMConfig(**json.loads(blobs[0]))
        vmeta = json.loads(blobs[1])
        vocab_cls = ClosedVocab if vmeta["closed"] else Vocabulary
        vocab = vocab_cls(
            token_to_id={t: i for i, t in enumerate(vmeta["tokens"])},
            counts=vmeta["counts"],
            min_count=vmeta["min_count"],
        )
        model = cls(config, vocab)
        model.log = json.loads(blobs[2])
        (nparams,) = take("<I")
        for _ in range(nparams):
            (nlen,) = take("<H")
            name = buf.read(nlen).decode()
            (dlen,) = take("<H")
            dt = np.dtype(buf.read(dlen).decode())
            (ndim,) = take("<B")
            shape = take(f"<{ndim}I")
            raw = buf.read(dt.itemsize * int(np.prod(shape)))
            if name not in model.params:
                raise ValueError(f"checkpoint has unknown parameter {name!r}")
            model.params[name] = T.Tensor(
                np.frombuffer(raw, dtype=dt).reshape(shape).copy()
            )
        return model
