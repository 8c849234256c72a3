"""Trainable compensation model: RGB refinement + two-branch Stokes network.

Three pipeline modes are supported:
  four_angle  — the network densifies the four sparse polarizer-angle
                planes; Stokes output is obtained by the analysis
                transform afterwards.
  stokes_full — the network densifies all three Stokes planes directly.
  stokes_s12  — the network densifies only the two difference planes;
                the unpolarized plane comes from the (refined) RGB image
                scaled by the sensitivity gain. This is the default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, ShapeMismatchError
from ..images import RgbImage, StokesImage
from ..stokes import GRAY_WEIGHTS
from . import tensor as T
from .layers import Conv, FeatureTransfer, ParamStore, UNetBranch

MODES = ("four_angle", "stokes_full", "stokes_s12")


@dataclass
class ModelConfig:
    base_channels: int = 8
    depth: int = 3
    mode: str = "stokes_s12"
    use_rgbrn: bool = True
    use_ftb: bool = True
    use_afa: bool = True
    gain: float = 0.35  # transmittance / 2 by default
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.base_channels < 2:
            raise ParameterError("base_channels must be >= 2")
        if self.depth < 1:
            raise ParameterError("depth must be >= 1")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if self.gain <= 0:
            raise ParameterError("gain must be positive")

    @property
    def data_channels(self) -> int:
        return {"four_angle": 4, "stokes_full": 3, "stokes_s12": 2}[self.mode]


@dataclass
class ModelInputs:
    """Per-sample network inputs as (C, H, W) float arrays."""

    rgb: np.ndarray  # demosaiced RGB, 3 channels
    sparse_stokes: np.ndarray  # pooled camera-referred Stokes, 3 channels
    sparse_four: np.ndarray  # zero-filled four-angle planes, 4 channels
    mask: np.ndarray  # 1 channel


@dataclass
class ForwardOutputs:
    g_hat: T.Tensor  # refined RGB (or pass-through), 3 channels
    data_first: T.Tensor
    conf_first: T.Tensor
    data_second: T.Tensor
    conf_second: T.Tensor
    data_final: T.Tensor  # blended network output, mode-dependent channels
    s_hat: T.Tensor  # Stokes-domain output used by the loss


def confidence_blend(x1: T.Tensor, c1: T.Tensor, x2: T.Tensor, c2: T.Tensor) -> T.Tensor:
    """Per-pixel softmax-weighted convex combination of the two outputs."""
    if x1.shape != x2.shape:
        raise ShapeMismatchError("blend inputs disagree on shape")
    w1, w2 = T.softmax_pair(c1, c2)
    return T.add(T.mul(w1, x1), T.mul(w2, x2))


def _stokes_from_angles_t(l: T.Tensor) -> T.Tensor:
    """Analysis transform applied channelwise inside the graph."""
    l0 = T.slice_channels(l, 0, 1)
    l45 = T.slice_channels(l, 1, 2)
    l90 = T.slice_channels(l, 2, 3)
    l135 = T.slice_channels(l, 3, 4)
    s0 = T.scale(T.add(T.add(l0, l45), T.add(l90, l135)), 0.25)
    s1 = T.scale(T.sub(l0, l90), 0.5)
    s2 = T.scale(T.sub(l45, l135), 0.5)
    return T.concat([s0, s1, s2])


class SnaModel:
    """End-to-end refinement + compensation model."""

    def __init__(self, config: ModelConfig):
        self.config = config
        dtype = np.dtype(config.dtype)
        self.store = ParamStore(config.seed, dtype=dtype)
        c = config.base_channels

        if config.use_rgbrn:
            self.rgbrn = [
                Conv(self.store, "rgbrn.c0", 7, c),
                Conv(self.store, "rgbrn.c1", c, c),
                Conv(self.store, "rgbrn.c2", c, c),
                Conv(self.store, "rgbrn.head", c, 3, act=None, zero=True),
            ]
        else:
            self.rgbrn = None

        n = config.data_channels
        self.branch1 = UNetBranch(
            self.store, "pcn.b1", n + 3 + 1, n, c, config.depth, config.use_afa
        )
        self.branch2 = UNetBranch(
            self.store, "pcn.b2", n + n + 1, n, c, config.depth, config.use_afa
        )
        if config.use_ftb:
            self.ftbs = {
                lvl: FeatureTransfer(self.store, f"pcn.ftb{lvl}", c * (2 ** lvl))
                for lvl in range(config.depth - 1)
            }
        else:
            self.ftbs = None

    # ------------------------------------------------------------------
    def param_count(self) -> int:
        return self.store.count()

    def _batched(self, samples: list[ModelInputs]) -> dict[str, np.ndarray]:
        dtype = self.store.dtype
        return {
            name: np.stack([getattr(s, name) for s in samples]).astype(dtype)
            for name in ("rgb", "sparse_stokes", "sparse_four", "mask")
        }

    def _refine_rgb(self, rgb_t, sparse_stokes_t, mask_t):
        if self.rgbrn is None:
            return rgb_t
        h = T.concat([rgb_t, sparse_stokes_t, mask_t])
        for conv in self.rgbrn[:-1]:
            h = conv(h)
        residual = self.rgbrn[-1](h)
        return T.add(rgb_t, residual)

    def forward(self, samples: list[ModelInputs]) -> ForwardOutputs:
        batch = self._batched(samples)
        rgb_t = T.constant(batch["rgb"])
        stokes_t = T.constant(batch["sparse_stokes"])
        four_t = T.constant(batch["sparse_four"])
        mask_t = T.constant(batch["mask"])

        g_hat = self._refine_rgb(rgb_t, stokes_t, mask_t)

        mode = self.config.mode
        if mode == "stokes_s12":
            data_in = T.slice_channels(stokes_t, 1, 3)
        elif mode == "stokes_full":
            data_in = stokes_t
        else:
            data_in = four_t

        b1_in = T.concat([g_hat, data_in, mask_t])
        d1, c1, dec_feats = self.branch1.forward(b1_in)

        inject = None
        if dec_feats:
            if self.ftbs is not None:
                inject = {lvl: self.ftbs[lvl](f) for lvl, f in dec_feats.items()}
            else:
                inject = dict(dec_feats)

        b2_in = T.concat([d1, data_in, mask_t])
        d2, c2, _ = self.branch2.forward(b2_in, inject=inject)

        final = confidence_blend(d1, c1, d2, c2)
        if mode == "four_angle":
            s_hat = _stokes_from_angles_t(final)
        else:
            s_hat = final
        return ForwardOutputs(g_hat, d1, c1, d2, c2, final, s_hat)

    # ------------------------------------------------------------------
    def predict(self, inputs: ModelInputs) -> tuple[StokesImage, RgbImage]:
        """Inference: full Stokes estimate plus refined RGB (clamped to [0, 1])."""
        out = self.forward([inputs])
        if self.config.use_rgbrn:
            g = np.clip(out.g_hat.data[0], 0.0, 1.0)
        else:
            # pass-through contract: demosaic output unchanged, no clamp
            g = np.asarray(inputs.rgb)
        rgb = RgbImage(g[0], g[1], g[2])
        mode = self.config.mode
        if mode == "stokes_s12":
            wr, wg, wb = GRAY_WEIGHTS
            s0 = self.config.gain * (wr * g[0] + wg * g[1] + wb * g[2])
            s12 = out.s_hat.data[0]
            stokes = StokesImage(s0, s12[0], s12[1])
        else:
            s = out.s_hat.data[0]
            stokes = StokesImage(s[0], s[1], s[2])
        return stokes, rgb
