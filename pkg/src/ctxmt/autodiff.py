"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: every ``Tensor`` produced by an op remembers its parents and
a closure that scatters the incoming gradient back to them.  ``backward``
runs one reverse topological sweep from a scalar loss.  All math is
float64; ops are vectorized over whole batches so the tape stays short.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "backward",
    "add",
    "mul",
    "matmul",
    "embedding",
    "reshape",
    "transpose",
    "relu",
    "softmax",
    "log_softmax",
    "layer_norm",
    "picked_nll",
]


class Tensor:
    """Array value on the tape; set requires_grad=True for parameters."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def accumulate(self, g: np.ndarray) -> None:
        # First contribution copies (g may be a view shared with siblings);
        # later contributions add in place.
        if self.grad is None:
            self.grad = np.array(g)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _from_op(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate(_unbroadcast(gb, b.data.shape))

    return _from_op(out_data, (a, b), bwd)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather: out[..., :] = table[ids[...], :]."""
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids, g)

    return _from_op(out_data, (table,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.data.shape))

    return _from_op(out_data, (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.transpose(axes)
    inverse = np.argsort(axes)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g.transpose(inverse))

    return _from_op(out_data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * (a.data > 0.0))

    return _from_op(out_data, (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out_data = exp / exp.sum(axis=-1, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            inner = (g * out_data).sum(axis=-1, keepdims=True)
            a.accumulate(out_data * (g - inner))

    return _from_op(out_data, (a,), bwd)


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis; rows normalize exactly."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out_data = shifted - log_z

    def bwd(g):
        if a.requires_grad:
            probs = np.exp(out_data)
            a.accumulate(g - probs * g.sum(axis=-1, keepdims=True))

    return _from_op(out_data, (a,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out_data = gamma.data * x_hat + beta.data

    def bwd(g):
        reduce_axes = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            gamma.accumulate((g * x_hat).sum(axis=reduce_axes))
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=reduce_axes))
        if x.requires_grad:
            gx_hat = g * gamma.data
            mean_g = gx_hat.mean(axis=-1, keepdims=True)
            mean_gx = (gx_hat * x_hat).mean(axis=-1, keepdims=True)
            x.accumulate(inv_std * (gx_hat - mean_g - x_hat * mean_gx))

    return _from_op(out_data, (x, gamma, beta), bwd)


def picked_nll(logp: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """Weighted negative log-likelihood of gold tokens.

    ``logp`` is (B, T, V); per example the weighted token losses are
    summed, then the batch is averaged.  Padded positions carry weight 0.
    """
    targets = np.asarray(targets)
    weights = np.asarray(weights, dtype=logp.data.dtype)
    batch = logp.data.shape[0]
    picked = np.take_along_axis(logp.data, targets[..., None], axis=-1)[..., 0]
    per_example = -(weights * picked).sum(axis=-1)
    out_data = per_example.mean()

    def bwd(g):
        if logp.requires_grad:
            buf = np.zeros_like(logp.data)
            scatter = (-(weights * float(g)) / batch)[..., None]
            np.put_along_axis(buf, targets[..., None], scatter, axis=-1)
            logp.accumulate(buf)

    return _from_op(np.asarray(out_data), (logp,), bwd)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable requires_grad leaf."""
    if loss.data.ndim != 0:
        raise ValueError("backward expects a scalar loss")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
