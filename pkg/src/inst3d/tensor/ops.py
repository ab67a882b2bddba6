"""Differentiable array ops.

Every op builds its output with ``Tensor.from_op`` and a closure that maps the
upstream gradient to per-parent gradients using only saved forward values.
Binary elementwise ops follow numpy broadcasting; gradients are summed back to
each operand's shape.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import Tensor, as_tensor

LN_EPS = 1e-5
MASK_FILL = -1e9
_GELU_C = math.sqrt(2.0 / math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return Tensor.from_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return Tensor.from_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return Tensor.from_op(ad * bd, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    """Batched matrix product ``a[..., m, k] @ b[..., k, n]``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor.from_op(ad @ bd, (a, b), backward, "matmul")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape

    def backward(g):
        return (g.reshape(src),)

    return Tensor.from_op(x.data.reshape(shape), (x,), backward, "reshape")


def swapaxes(x: Tensor, a1: int, a2: int) -> Tensor:
    def backward(g):
        return (np.swapaxes(g, a1, a2),)

    return Tensor.from_op(np.swapaxes(x.data, a1, a2).copy(), (x,), backward, "swapaxes")


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor.from_op(np.concatenate([x.data for x in xs], axis=axis), xs, backward, "concat")


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    n = len(xs)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return Tensor.from_op(np.stack([x.data for x in xs], axis=axis), xs, backward, "stack")


def take(x: Tensor, index: int, axis: int = 0) -> Tensor:
    """Select one slice along ``axis`` (the axis is dropped)."""
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        sl = [slice(None)] * len(shape)
        sl[axis] = index
        full[tuple(sl)] = g
        return (full,)

    return Tensor.from_op(np.take(x.data, index, axis=axis), (x,), backward, "take")


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor.from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(y, (x,), backward, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalise over the last axis with population variance, then scale and shift."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(f"layer_norm affine params must have shape ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gamma.data

    def backward(g):
        gxhat = g * gd
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        red = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return Tensor.from_op(xhat * gd + beta.data, (x, gamma, beta), backward, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd ** 3)
    t = np.tanh(inner)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * dinner),)

    return Tensor.from_op(0.5 * xd * (1.0 + t), (x,), backward, "gelu")


def max_pool(x: Tensor, axis: int = 0) -> Tensor:
    """Max along ``axis``; the gradient goes to the first maximiser."""
    idx = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    out = np.take_along_axis(x.data, idx, axis=axis)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return Tensor.from_op(np.squeeze(out, axis=axis), (x,), backward, "max_pool")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with ``w`` stored as [in, out]."""
    y = matmul(x, w) if x.ndim >= 2 else reshape(matmul(reshape(x, (1, -1)), w), (-1,))
    return y if b is None else add(y, b)


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """``x[index]`` for a 2D ``x`` [R, D] and an integer index array of any shape."""
    index = np.asarray(index, dtype=np.int64)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, index.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return Tensor.from_op(x.data[index], (x,), backward, "gather_rows")
