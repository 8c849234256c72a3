"""Minimal reverse-mode autodiff on numpy arrays.

Only the operations needed by the compensation networks are provided:
3x3/1x1 convolutions (stride 1 or 2), 2x2 stride-2 transposed
convolution, relu, sigmoid, elementwise arithmetic with broadcasting,
channel concat/slice, global average pooling, and L1/L2 losses.

Tensors carry (batch, channels, height, width) data or scalar loss
values. Gradients accumulate into .grad during backward(), which walks
the graph in reverse topological order. Set NAN_CHECK to True to assert
finiteness after every op.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError

NAN_CHECK = False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self._parents)
        self.name = name
        if NAN_CHECK and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in tensor {name or ''}")

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        order = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self._accumulate(np.ones_like(self.data))
        for t in reversed(order):
            if t._backward is not None and t.requires_grad:
                t._backward(t.grad)

    def zero_grad(self):
        self.grad = None

    # convenience arithmetic for scalar loss composition
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else constant(other))

    def __mul__(self, k):
        return scale(self, float(k))

    __rmul__ = __mul__


def parameter(data, name=None) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True, name=name)


def constant(data, name=None) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=False, name=name)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def scale(a: Tensor, k: float) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * k)

    return Tensor(a.data * k, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * keep)

    return Tensor(np.where(keep, a.data, 0.0), (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * y * (1.0 - y))

    return Tensor(y, (a,), bwd)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(g):
        pos = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(pos, pos + n)
                t._accumulate(g[tuple(sl)])
            pos += n

    return Tensor(data, tuple(tensors), bwd)


def slice_channels(a: Tensor, start: int, stop: int) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[:, start:stop] = g
            a._accumulate(full)

    return Tensor(a.data[:, start:stop].copy(), (a,), bwd)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """2-d convolution, odd square kernel, zero padding k//2."""
    bs, cin, h, wd = x.data.shape
    cout, cin_w, k, k2 = w.data.shape
    if cin != cin_w or k != k2:
        raise ShapeMismatchError(
            f"conv2d shape mismatch: input {x.data.shape}, weight {w.data.shape}"
        )
    p = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    y = np.einsum("bchwij,ocij->bohw", win, w.data, optimize=True)
    y += b.data[None, :, None, None]
    ho, wo = y.shape[2], y.shape[3]

    def bwd(g):
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            w._accumulate(np.einsum("bohw,bchwij->ocij", g, win, optimize=True))
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                        np.einsum("bohw,oc->bchw", g, w.data[:, :, i, j], optimize=True)
                    )
            x._accumulate(dxp[:, :, p : p + h, p : p + wd])

    return Tensor(y, (x, w, b), bwd)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """2x upsampling transposed convolution (2x2 kernel, stride 2)."""
    bs, cin, h, wd = x.data.shape
    cin_w, cout, k, k2 = w.data.shape
    if cin != cin_w or (k, k2) != (2, 2):
        raise ShapeMismatchError(
            f"conv_transpose2d shape mismatch: input {x.data.shape}, weight {w.data.shape}"
        )
    y6 = np.einsum("bchw,cdij->bdhiwj", x.data, w.data, optimize=True)
    y = y6.reshape(bs, cout, 2 * h, 2 * wd) + b.data[None, :, None, None]

    def bwd(g):
        g6 = g.reshape(bs, cout, h, 2, wd, 2)
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            w._accumulate(np.einsum("bchw,bdhiwj->cdij", x.data, g6, optimize=True))
        if x.requires_grad:
            x._accumulate(np.einsum("bdhiwj,cdij->bchw", g6, w.data, optimize=True))

    return Tensor(y, (x, w, b), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    h, w = x.data.shape[2], x.data.shape[3]
    y = x.data.mean(axis=(2, 3), keepdims=True)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g / (h * w), x.data.shape).copy())

    return Tensor(y, (x,), bwd)


def softmax_pair(c1: Tensor, c2: Tensor) -> tuple[Tensor, Tensor]:
    """Per-pixel two-way softmax weights (w1, w2), w1 + w2 = 1."""
    w1 = sigmoid(sub(c1, c2))
    one = constant(np.ones_like(w1.data))
    return w1, sub(one, w1)


def l1_loss(pred: Tensor, target) -> Tensor:
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    diff = pred.data - target
    n = diff.size

    def bwd(g):
        if pred.requires_grad:
            pred._accumulate(g * np.sign(diff) / n)

    return Tensor(np.mean(np.abs(diff)), (pred,), bwd)


def l2_loss(pred: Tensor, target) -> Tensor:
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    diff = pred.data - target
    n = diff.size

    def bwd(g):
        if pred.requires_grad:
            pred._accumulate(g * 2.0 * diff / n)

    return Tensor(np.mean(diff * diff), (pred,), bwd)
