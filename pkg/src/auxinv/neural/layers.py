"""Parameter bundles and forward functions for the two architectures.

Parameters live in flat ``{name: Tensor}`` dicts so checkpoints are a
straight walk over named arrays.  All weights and biases draw from
uniform(-0.1, 0.1), matching the training recipe's initialization.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T


def uniform_param(rng, shape, dtype, scale=0.1) -> T.Tensor:
    return T.Tensor(rng.uniform(-scale, scale, shape).astype(dtype))


def linear(x: T.Tensor, params, name: str) -> T.Tensor:
    return T.add(T.matmul(x, params[f"{name}.w"]), params[f"{name}.b"])


def init_linear(params, rng, name, n_in, n_out, dtype):
    params[f"{name}.w"] = uniform_param(rng, (n_in, n_out), dtype)
    params[f"{name}.b"] = uniform_param(rng, (n_out,), dtype)


# -- LSTM -------------------------------------------------------------------


def init_lstm_layer(params, rng, name, n_in, hidden, dtype):
    params[f"{name}.wx"] = uniform_param(rng, (n_in, 4 * hidden), dtype)
    params[f"{name}.wh"] = uniform_param(rng, (hidden, 4 * hidden), dtype)
    params[f"{name}.b"] = uniform_param(rng, (4 * hidden,), dtype)


def lstm_step(params, name, x, h, c):
    """One cell update; gate order input, forget, candidate, output."""
    hidden = h.shape[-1]
    gates = T.add(
        T.add(T.matmul(x, params[f"{name}.wx"]), T.matmul(h, params[f"{name}.wh"])),
        params[f"{name}.b"],
    )
    i = T.sigmoid(gates[:, 0 * hidden : 1 * hidden])
    f = T.sigmoid(gates[:, 1 * hidden : 2 * hidden])
    g = T.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = T.sigmoid(gates[:, 3 * hidden : 4 * hidden])
    c_new = T.add(T.mul(f, c), T.mul(i, g))
    h_new = T.mul(o, T.tanh(c_new))
    return h_new, c_new


# -- Transformer --------------------------------------------------------------


def init_transformer_block(params, rng, name, hidden, dtype):
    for proj in ("q", "k", "v", "o"):
        init_linear(params, rng, f"{name}.att.{proj}", hidden, hidden, dtype)
    params[f"{name}.ln1.g"] = uniform_param(rng, (hidden,), dtype)
    params[f"{name}.ln1.b"] = uniform_param(rng, (hidden,), dtype)
    params[f"{name}.ln2.g"] = uniform_param(rng, (hidden,), dtype)
    params[f"{name}.ln2.b"] = uniform_param(rng, (hidden,), dtype)
    init_linear(params, rng, f"{name}.ffn.1", hidden, 4 * hidden, dtype)
    init_linear(params, rng, f"{name}.ffn.2", 4 * hidden, hidden, dtype)


def causal_mask(length: int, dtype) -> np.ndarray:
    """(1, 1, T, T) additive mask: 0 at or before the query, -inf after."""
    mask = np.zeros((length, length), dtype=dtype)
    mask[np.triu_indices(length, k=1)] = -np.inf
    return mask[None, None, :, :]


def multi_head_attention(params, name, x, heads, mask, drop_rate, rng, train):
    """Causal self-attention; future positions carry exactly zero weight."""
    batch, length, hidden = x.shape
    head_dim = hidden // heads

    def split_heads(t):
        t = T.reshape(t, (batch, length, heads, head_dim))
        return T.transpose(t, (0, 2, 1, 3))

    q = split_heads(linear(x, params, f"{name}.att.q"))
    k = split_heads(linear(x, params, f"{name}.att.k"))
    v = split_heads(linear(x, params, f"{name}.att.v"))
    scores = T.matmul(T.mul(q, 1.0 / np.sqrt(head_dim)), T.transpose(k, (0, 1, 3, 2)))
    scores = T.add(scores, mask[:, :, :length, :length])
    weights = T.softmax(scores, axis=-1)
    weights = T.dropout(weights, drop_rate, rng, train)
    mixed = T.matmul(weights, v)
    mixed = T.reshape(T.transpose(mixed, (0, 2, 1, 3)), (batch, length, hidden))
    return linear(mixed, params, f"{name}.att.o")


def transformer_block(params, name, x, heads, mask, drop_rate, rng, train):
    """Post-norm residual block: LN(x + Att(x)), then LN(x + FFN(x))."""
    att = multi_head_attention(params, name, x, heads, mask, drop_rate, rng, train)
    att = T.dropout(att, drop_rate, rng, train)
    x = T.layer_norm(T.add(x, att), params[f"{name}.ln1.g"], params[f"{name}.ln1.b"])
    inner = T.relu(linear(x, params, f"{name}.ffn.1"))
    out = linear(inner, params, f"{name}.ffn.2")
    out = T.dropout(out, drop_rate, rng, train)
    return T.layer_norm(T.add(x, out), params[f"{name}.ln2.g"], params[f"{name}.ln2.b"])
