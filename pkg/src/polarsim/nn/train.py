"""Training loop, loss, optimizer, and checkpoint serialization."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ParameterError
from . import tensor as T
from .model import ForwardOutputs, ModelConfig, ModelInputs, SnaModel

CHECKPOINT_MAGIC = b"PSNA1\n"


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 2
    lr: float = 1e-3
    lr_decay: float = 0.95  # multiplicative, per epoch
    lambda0: float = 0.2  # intermediate-supervision weight, decays linearly to 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError("lr must be positive")
        if self.lambda0 < 0:
            raise ParameterError("lambda0 must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("epochs and batch_size must be >= 1")

    def lam_at(self, epoch: int) -> float:
        if self.epochs <= 1:
            return self.lambda0
        return self.lambda0 * (1.0 - epoch / (self.epochs - 1))

    def lr_at(self, epoch: int) -> float:
        return self.lr * (self.lr_decay ** epoch)


@dataclass
class Targets:
    """Per-sample ground truth: camera-referred Stokes + clean RGB."""

    stokes: np.ndarray  # (3, H, W)
    rgb: np.ndarray  # (3, H, W)


def compute_loss(
    out: ForwardOutputs, targets: list[Targets], lam: float, mode: str, dtype
) -> tuple[T.Tensor, dict]:
    """L1 on Stokes outputs (final + lam-weighted intermediates), L2 on RGB."""
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    s_gt = np.stack([t.stokes for t in targets]).astype(dtype)
    g_gt = np.stack([t.rgb for t in targets]).astype(dtype)
    if mode == "stokes_s12":
        tgt = s_gt[:, 1:3]
    else:
        tgt = s_gt
    l_final = T.l1_loss(out.s_hat, tgt)
    if mode == "four_angle":
        from .model import _stokes_from_angles_t

        inter1 = T.l1_loss(_stokes_from_angles_t(out.data_first), tgt)
        inter2 = T.l1_loss(_stokes_from_angles_t(out.data_second), tgt)
    else:
        inter1 = T.l1_loss(out.data_first, tgt)
        inter2 = T.l1_loss(out.data_second, tgt)
    l_rgb = T.l2_loss(out.g_hat, g_gt)
    total = T.add(T.add(l_final, T.scale(T.add(inter1, inter2), lam)), l_rgb)
    terms = {
        "loss_stokes": float(l_final.data),
        "loss_inter": float(inter1.data + inter2.data),
        "loss_rgb": float(l_rgb.data),
        "loss_total": float(total.data),
    }
    return total, terms


class Adam:
    """Adam with bias correction over a ParamStore."""

    def __init__(self, store, cfg: TrainConfig):
        self.store = store
        self.cfg = cfg
        self.m = {k: np.zeros_like(t.data) for k, t in store.tensors.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in store.tensors.items()}
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.eps
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for k, p in self.store.tensors.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            p.data = p.data - lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + eps)


def _as_pair(item) -> tuple[ModelInputs, Targets]:
    """Accept (inputs, targets) tuples or any object carrying both."""
    if hasattr(item, "inputs") and hasattr(item, "targets"):
        return item.inputs, item.targets
    return item


def _val_s12_rmse(model: SnaModel, val: list[tuple[ModelInputs, Targets]]) -> float:
    errs = []
    for inputs, tgt in val:
        stokes, _ = model.predict(inputs)
        d1 = stokes.s1 - tgt.stokes[1]
        d2 = stokes.s2 - tgt.stokes[2]
        errs.append(np.sqrt(np.mean(np.stack([d1, d2]) ** 2)))
    return float(np.mean(errs)) if errs else float("nan")


def train(
    train_set: list[tuple[ModelInputs, Targets]],
    val_set: list[tuple[ModelInputs, Targets]],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> tuple[SnaModel, list[dict]]:
    """Train a model; returns (model at best validation epoch, history).

    Deterministic given the model and training seeds. Aborts with a
    diagnostic if the loss becomes non-finite.
    """
    if not train_set:
        raise ParameterError("training set is empty")
    train_set = [_as_pair(s) for s in train_set]
    val_set = [_as_pair(s) for s in val_set]
    model = SnaModel(model_cfg)
    opt = Adam(model.store, train_cfg)
    history: list[dict] = []
    best_val = float("inf")
    best_state = model.store.state()
    dtype = model.store.dtype

    for epoch in range(train_cfg.epochs):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([train_cfg.seed, epoch]))
        )
        order = rng.permutation(len(train_set))
        lam = train_cfg.lam_at(epoch)
        lr = train_cfg.lr_at(epoch)
        epoch_terms: list[dict] = []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            samples = [train_set[i][0] for i in idx]
            targets = [train_set[i][1] for i in idx]
            model.store.zero_grads()
            out = model.forward(samples)
            loss, terms = compute_loss(out, targets, lam, model_cfg.mode, dtype)
            if not np.isfinite(terms["loss_total"]):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: loss={terms['loss_total']}"
                )
            loss.backward()
            opt.step(lr)
            epoch_terms.append(terms)

        row = {
            "epoch": epoch,
            "lr": lr,
            "lambda": lam,
        }
        for key in ("loss_stokes", "loss_inter", "loss_rgb", "loss_total"):
            row[key] = float(np.mean([t[key] for t in epoch_terms]))
        val_rmse = _val_s12_rmse(model, val_set)
        row["val_s12_rmse"] = val_rmse
        history.append(row)
        if np.isfinite(val_rmse) and val_rmse < best_val:
            best_val = val_rmse
            best_state = model.store.state()

    model.store.load_state(best_state)
    return model, history


# ----------------------------------------------------------------------
# checkpoint format: magic, json header line (config + tensor manifest),
# then concatenated float32 little-endian tensor data.
def save_checkpoint(path, model: SnaModel) -> None:
    state = model.store.state()
    manifest = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    header = {
        "version": 1,
        "config": asdict(model.config),
        "tensors": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for v in state.values():
            f.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path) -> SnaModel:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ParameterError(f"{path}: not a polarsim checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode())
        if header.get("version") != 1:
            raise ParameterError(f"unsupported checkpoint version {header.get('version')}")
        model = SnaModel(ModelConfig(**header["config"]))
        state = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = f.read(4 * n)
            state[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape)
        model.store.load_state(state)
    return model


def history_to_csv(history: list[dict], path) -> None:
    import csv

    if not history:
        return
    keys = list(history[0].keys())
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(keys)
        for row in history:
            wr.writerow([row[k] for k in keys])
