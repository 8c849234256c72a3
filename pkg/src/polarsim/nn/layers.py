"""Parameter store and network building blocks.

Weight init is Kaiming-style fan-in scaling; residual output heads are
zero-initialized so residual blocks start as the identity.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ParameterError
from . import tensor as T


class ParamStore:
    """Named, deterministically ordered collection of trainable tensors."""

    def __init__(self, seed: int, dtype=np.float64):
        self.tensors: OrderedDict[str, T.Tensor] = OrderedDict()
        self.dtype = np.dtype(dtype)
        self._rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([int(seed), 0x9E3779B9]))
        )

    def create(self, name: str, shape: tuple, std: float = 0.0, zero: bool = False) -> T.Tensor:
        if name in self.tensors:
            raise ParameterError(f"parameter {name!r} registered twice")
        if zero or std == 0.0:
            data = np.zeros(shape, dtype=self.dtype)
        else:
            data = self._rng.normal(0.0, std, size=shape).astype(self.dtype)
        t = T.parameter(data, name=name)
        self.tensors[name] = t
        return t

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grads(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self.tensors.items())

    def load_state(self, state) -> None:
        for k, t in self.tensors.items():
            if k not in state:
                raise ParameterError(f"checkpoint missing parameter {k!r}")
            a = np.asarray(state[k], dtype=self.dtype)
            if a.shape != t.data.shape:
                raise ParameterError(
                    f"parameter {k!r} shape {a.shape} != expected {t.data.shape}"
                )
            t.data = a


class Conv:
    def __init__(self, store, name, cin, cout, k=3, stride=1, act="relu", zero=False):
        std = np.sqrt(2.0 / (cin * k * k))
        self.w = store.create(f"{name}.w", (cout, cin, k, k), std=std, zero=zero)
        self.b = store.create(f"{name}.b", (cout,), zero=True)
        self.stride = stride
        self.act = act

    def __call__(self, x):
        y = T.conv2d(x, self.w, self.b, stride=self.stride)
        return T.relu(y) if self.act == "relu" else y


class TConv:
    def __init__(self, store, name, cin, cout, act="relu"):
        std = np.sqrt(2.0 / (cin * 4))
        self.w = store.create(f"{name}.w", (cin, cout, 2, 2), std=std)
        self.b = store.create(f"{name}.b", (cout,), zero=True)
        self.act = act

    def __call__(self, x):
        y = T.conv_transpose2d(x, self.w, self.b)
        return T.relu(y) if self.act == "relu" else y


class FeatureTransfer:
    """1x1 conv + relu + zero-init 3x3 conv, residual; identity at init."""

    def __init__(self, store, name, channels):
        self.c1 = Conv(store, f"{name}.c1", channels, channels, k=1, act="relu")
        self.c2 = Conv(store, f"{name}.c2", channels, channels, k=3, act=None, zero=True)

    def __call__(self, x):
        return T.add(x, self.c2(self.c1(x)))


class AttentionAggregate:
    """Channel-attention skip: decoder + sigmoid-weighted encoder features.

    The weights come from a two-layer bottleneck over the global average
    of the concatenated encoder/decoder descriptors.
    """

    def __init__(self, store, name, channels):
        hidden = max(channels // 2, 2)
        self.fc1 = Conv(store, f"{name}.fc1", 2 * channels, hidden, k=1, act="relu")
        self.fc2 = Conv(store, f"{name}.fc2", hidden, channels, k=1, act=None)

    def __call__(self, enc, dec):
        desc = T.global_avg_pool(T.concat([enc, dec]))
        w = T.sigmoid(self.fc2(self.fc1(desc)))
        return T.add(dec, T.mul(w, enc))


class UNetBranch:
    """Small encoder-decoder with skips; emits data channels + 1 confidence.

    forward() optionally accepts per-level features injected into the
    encoder (used to pass first-branch decoder features to the second
    branch) and returns the decoder features for the same purpose.
    """

    def __init__(self, store, name, in_ch, data_ch, base, depth, use_afa):
        self.depth = depth
        self.data_ch = data_ch
        widths = [base * (2 ** i) for i in range(depth)]
        self.widths = widths
        self.stem = Conv(store, f"{name}.stem", in_ch, widths[0])
        self.down = []
        for i in range(1, depth):
            self.down.append(
                (
                    Conv(store, f"{name}.down{i}.a", widths[i - 1], widths[i], stride=2),
                    Conv(store, f"{name}.down{i}.b", widths[i], widths[i]),
                )
            )
        self.mid = Conv(store, f"{name}.mid", widths[-1], widths[-1])
        self.up = []
        self.afa = []
        for i in range(depth - 2, -1, -1):
            self.up.append(
                (
                    TConv(store, f"{name}.up{i}.t", widths[i + 1], widths[i]),
                    Conv(store, f"{name}.up{i}.c", widths[i], widths[i]),
                )
            )
            self.afa.append(
                AttentionAggregate(store, f"{name}.afa{i}", widths[i]) if use_afa else None
            )
        self.head = Conv(store, f"{name}.head", widths[0], data_ch + 1, act=None, zero=True)

    def forward(self, x, inject=None):
        enc = []
        h = self.stem(x)
        if inject and 0 in inject:
            h = T.add(h, inject[0])
        enc.append(h)
        for i, (down_a, down_b) in enumerate(self.down, start=1):
            h = down_b(down_a(h))
            if inject and i in inject:
                h = T.add(h, inject[i])
            enc.append(h)
        h = self.mid(h)
        dec_feats = {}
        for j, (tconv, conv) in enumerate(self.up):
            level = self.depth - 2 - j
            h = tconv(h)
            if self.afa[j] is not None:
                h = self.afa[j](enc[level], h)
            else:
                h = T.add(h, enc[level])
            h = conv(h)
            dec_feats[level] = h
        out = self.head(h)
        data = T.slice_channels(out, 0, self.data_ch)
        conf = T.slice_channels(out, self.data_ch, self.data_ch + 1)
        return data, conf, dec_feats
