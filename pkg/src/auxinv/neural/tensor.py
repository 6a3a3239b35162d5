"""Reverse-mode automatic differentiation over numpy arrays.

Every op builds a node holding its inputs and a closure that maps the
output gradient to input-gradient contributions.  ``Tensor.backward``
topologically sorts the graph once and runs the closures in reverse.
Arrays are 64-bit floats unless a tensor is created as float32; mixed
inputs follow numpy promotion.  Gradients always match the value shape,
with broadcasting undone by summation.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested op."""


class NumericFault(FloatingPointError):
    """A non-finite value appeared where the math requires finite ones."""


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bw")

    def __init__(self, data, parents=(), bw=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self._parents = tuple(parents)
        self._bw = bw

    # -- introspection ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # -- autodiff ---------------------------------------------------------

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self, seed=None):
        """Run reverse-mode accumulation from this node.

        ``seed`` defaults to ones (a scalar loss wants exactly that).
        """
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.data)
        self.accumulate(seed)
        for node in reversed(topo):
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape):
        return reshape(self, *shape)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape``, reversing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _const(x, like: Tensor):
    return np.asarray(x, dtype=like.data.dtype)


# -- arithmetic -----------------------------------------------------------


def add(a: Tensor, b):
    if isinstance(b, Tensor):
        try:
            out_data = a.data + b.data
        except ValueError as exc:
            raise ShapeError(f"add: {a.shape} vs {b.shape}") from exc

        def bw(g):
            a.accumulate(_unbroadcast(g, a.data.shape))
            b.accumulate(_unbroadcast(g, b.data.shape))

        return Tensor(out_data, (a, b), bw)
    c = _const(b, a)
    try:
        out_data = a.data + c
    except ValueError as exc:
        raise ShapeError(f"add: {a.shape} vs {c.shape}") from exc

    def bw_const(g):
        a.accumulate(_unbroadcast(g, a.data.shape))

    return Tensor(out_data, (a,), bw_const)


def mul(a: Tensor, b):
    if isinstance(b, Tensor):
        try:
            out_data = a.data * b.data
        except ValueError as exc:
            raise ShapeError(f"mul: {a.shape} vs {b.shape}") from exc

        def bw(g):
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

        return Tensor(out_data, (a, b), bw)
    c = _const(b, a)
    out_data = a.data * c

    def bw_const(g):
        a.accumulate(_unbroadcast(g * c, a.data.shape))

    return Tensor(out_data, (a,), bw_const)


def matmul(a: Tensor, b: Tensor):
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands need at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        a.accumulate(_unbroadcast(ga, a.data.shape))
        b.accumulate(_unbroadcast(gb, b.data.shape))

    return Tensor(out_data, (a, b), bw)


# -- pointwise ------------------------------------------------------------


def sigmoid(a: Tensor):
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        a.accumulate(g * out_data * (1.0 - out_data))

    return Tensor(out_data, (a,), bw)


def tanh(a: Tensor):
    out_data = np.tanh(a.data)

    def bw(g):
        a.accumulate(g * (1.0 - out_data * out_data))

    return Tensor(out_data, (a,), bw)


def relu(a: Tensor):
    out_data = np.maximum(a.data, 0.0)

    def bw(g):
        a.accumulate(g * (a.data > 0.0))

    return Tensor(out_data, (a,), bw)


# -- structure ------------------------------------------------------------


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            t.accumulate(piece)

    return Tensor(out_data, tuple(tensors), bw)


def take(a: Tensor, key):
    out_data = a.data[key]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        a.accumulate(full)

    return Tensor(out_data, (a,), bw)


def reshape(a: Tensor, *shape):
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    out_data = a.data.reshape(shape)

    def bw(g):
        a.accumulate(g.reshape(a.data.shape))

    return Tensor(out_data, (a,), bw)


def transpose(a: Tensor, axes):
    axes = tuple(axes)
    out_data = a.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def bw(g):
        a.accumulate(g.transpose(inverse))

    return Tensor(out_data, (a,), bw)


def embedding(table: Tensor, ids):
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding ids must be integers")
    out_data = table.data[ids]

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))
        table.accumulate(full)

    return Tensor(out_data, (table,), bw)


def dropout(a: Tensor, rate: float, rng, train: bool = True):
    """Inverted dropout; the caller owns the rng so runs are replayable."""
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    mask = mask.astype(a.data.dtype)
    out_data = a.data * mask

    def bw(g):
        a.accumulate(g * mask)

    return Tensor(out_data, (a,), bw)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5):
    """Normalize the last axis to zero mean and unit variance, then affine."""
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out_data = xhat * gain.data + bias.data

    def bw(g):
        gain.accumulate(_unbroadcast(g * xhat, gain.data.shape))
        bias.accumulate(_unbroadcast(g, bias.data.shape))
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        a.accumulate(inv * (dxhat - m1 - xhat * m2))

    return Tensor(out_data, (a, gain, bias), bw)


def softmax(a: Tensor, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a.accumulate(out_data * (g - dot))

    return Tensor(out_data, (a,), bw)


def softmax_cross_entropy(logits: Tensor, targets):
    """Mean negative log-likelihood of ``targets`` under row softmax.

    Returns ``(loss, per_row_logprob)`` where the second item is a plain
    array of ln p(target) per row, for perplexity bookkeeping.
    """
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(
            f"cross-entropy wants (N,V) logits and (N,) targets, "
            f"got {logits.shape} and {targets.shape}"
        )
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(targets.shape[0])
    picked = logp[rows, targets]
    loss_val = -picked.mean()
    if not math.isfinite(loss_val):
        raise NumericFault(f"non-finite cross-entropy loss {loss_val}")
    probs = np.exp(logp)

    def bw(g):
        scale = np.asarray(g).reshape(()) / targets.shape[0]
        d = probs.copy()
        d[rows, targets] -= 1.0
        logits.accumulate(d * scale)

    return Tensor(np.asarray(loss_val, dtype=logits.dtype), (logits,), bw), picked


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Float64 log-softmax of a plain array's last axis (evaluation path)."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def global_norm(tensors) -> float:
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float((t.grad.astype(np.float64) ** 2).sum())
    return math.sqrt(total)


def clip_gradients(tensors, max_norm: float) -> float:
    """Scale all gradients so the global norm is at most ``max_norm``."""
    norm = global_norm(tensors)
    if not math.isfinite(norm):
        raise NumericFault(f"non-finite gradient norm {norm}")
    if norm > max_norm > 0:
        factor = max_norm / norm
        for t in tensors:
            if t.grad is not None:
                t.grad *= factor
    return norm
