"""End-to-end acceptance checks: analytic values, statistical properties,
oracle equivalence, training orderings, structural invariants, determinism.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import random_rgb, random_valid_stokes
from polarsim import interp, metrics, pipeline
from polarsim.cli import main as cli_main
from polarsim.images import PixelMask, RgbImage, StokesImage
from polarsim.nn import tensor as T
from polarsim.nn.layers import AttentionAggregate, FeatureTransfer, ParamStore
from polarsim.nn.model import ModelConfig, ModelInputs, SnaModel, confidence_blend
from polarsim.nn.train import Targets, TrainConfig, compute_loss, train
from polarsim.experiment import (
    camera_referred,
    prepare_sparse_sample,
    reconstruct_sparse,
)
from polarsim.scenegen import SceneParams, generate, make_dataset
from polarsim.sensor import (
    SensorConfig,
    build_layout,
    capture,
    resolution_analysis,
    snr_analysis,
)
from polarsim.stokes import four_angles_from_stokes, stokes_from_four_angles
from test_interp import brute_force_joint_bilateral
from test_metrics import naive_ssim
from test_nn_ops import numeric_grad


def test_01_analytic_reproduction():
    t0 = time.perf_counter()
    res = resolution_analysis(1.0 / 16.0)
    snr = snr_analysis(SensorConfig(transmittance=0.7))
    elapsed = time.perf_counter() - t0
    assert abs(res.rgb_factor - 3.75) < 1e-12
    assert abs(snr.rgb_snr_ratio - math.sqrt(1.0 / 1.4)) < 1e-12
    assert elapsed < 1e-3


def test_02_stokes_round_trip_float32():
    rng = np.random.default_rng(0)
    n = 1_000_000
    s0 = rng.uniform(0.05, 1.0, n)
    d = rng.uniform(0.0, 1.0, n)
    two_a = rng.uniform(0.0, 2.0 * np.pi, n)
    s = StokesImage(
        s0.reshape(1000, 1000).astype(np.float32),
        (s0 * d * np.cos(two_a)).reshape(1000, 1000).astype(np.float32),
        (s0 * d * np.sin(two_a)).reshape(1000, 1000).astype(np.float32),
    )
    t0 = time.perf_counter()
    four = four_angles_from_stokes(s, allow_invalid=True)
    four32 = type(four)(*[p.astype(np.float32) for p in (four.l0, four.l45, four.l90, four.l135)])
    back = stokes_from_four_angles(four32)
    elapsed = time.perf_counter() - t0
    assert np.abs(back.s0 - s.s0).max() < 1e-5
    assert np.abs(back.s1 - s.s1).max() < 1e-5
    assert np.abs(back.s2 - s.s2).max() < 1e-5
    assert elapsed < 1.0


@pytest.mark.parametrize("f_n", [0.72, 3.6])
def test_03_noise_statistics(f_n):
    h = w = 384  # ~138k regular pixels at r = 1/16
    v = 0.5
    plane = np.full((h, w), v)
    zeros = np.zeros((h, w))
    chans = tuple(StokesImage(plane, zeros, zeros) for _ in range(3))
    layout = build_layout("sparse", h, w, 1 / 16)
    cfg = SensorConfig(ratio=1 / 16, noise_factor=f_n, seed=11)
    t0 = time.perf_counter()
    raw = capture(chans, layout, cfg)
    regular = raw.values[layout.pol_mask == 0]
    assert regular.size > 100_000
    measured = regular.std()
    expected = f_n * math.sqrt(v * cfg.full_scale) / cfg.full_scale
    assert abs(measured / expected - 1.0) < 0.02
    assert time.perf_counter() - t0 < 5.0


def test_04_gradient_checks():
    """Representative primitives plus every composite block, float64."""
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()

    def check(loss_fn, tensors, arrays):
        loss = loss_fn()
        loss.backward()
        grads = [t.grad.copy() for t in tensors]
        for g, arr in zip(grads, arrays):
            num = numeric_grad(lambda: float(loss_fn().data), arr)
            rel = np.abs(g - num).max() / max(np.abs(num).max(), 1e-8)
            assert rel < 1e-4

    # conv2d
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((4, 3, 3, 3)) * 0.5
    b = rng.standard_normal(4) * 0.1
    tgt = rng.standard_normal((2, 4, 8, 8)) + 3.0
    tx, tw, tb = T.parameter(x), T.parameter(w), T.parameter(b)
    check(lambda: T.l2_loss(T.conv2d(tx, tw, tb), tgt), [tx, tw, tb], [x, w, b])

    # transposed conv
    x2 = rng.standard_normal((2, 4, 4, 4))
    w2 = rng.standard_normal((4, 2, 2, 2)) * 0.5
    b2 = rng.standard_normal(2) * 0.1
    tgt2 = rng.standard_normal((2, 2, 8, 8)) + 3.0
    tx2, tw2, tb2 = T.parameter(x2), T.parameter(w2), T.parameter(b2)
    check(
        lambda: T.l2_loss(T.conv_transpose2d(tx2, tw2, tb2), tgt2),
        [tx2, tw2, tb2],
        [x2, w2, b2],
    )

    # feature transfer block
    store = ParamStore(seed=0, dtype=np.float64)
    ftb = FeatureTransfer(store, "ftb", 4)
    store.tensors["ftb.c2.w"].data += rng.standard_normal((4, 4, 3, 3)) * 0.2
    xf = rng.uniform(0.2, 1.0, (2, 4, 8, 8))
    tgtf = rng.standard_normal((2, 4, 8, 8)) + 3.0
    params = [store.tensors["ftb.c1.w"], store.tensors["ftb.c2.w"]]
    check(
        lambda: T.l2_loss(ftb(T.constant(xf)), tgtf),
        params,
        [p.data for p in params],
    )

    # attention aggregation
    store2 = ParamStore(seed=1, dtype=np.float64)
    afa = AttentionAggregate(store2, "afa", 4)
    store2.tensors["afa.fc2.w"].data += rng.standard_normal(
        store2.tensors["afa.fc2.w"].data.shape
    ) * 0.3
    enc = rng.uniform(0.2, 1.0, (2, 4, 8, 8))
    dec = rng.uniform(0.2, 1.0, (2, 4, 8, 8))
    te, td = T.parameter(enc), T.parameter(dec)
    check(lambda: T.l2_loss(afa(te, td), tgtf), [te, td], [enc, dec])

    # confidence blending
    x1 = rng.standard_normal((2, 2, 8, 8))
    xb = rng.standard_normal((2, 2, 8, 8))
    c1 = rng.standard_normal((2, 1, 8, 8))
    c2 = rng.standard_normal((2, 1, 8, 8))
    tgtb = rng.standard_normal((2, 2, 8, 8))
    ts = [T.parameter(a) for a in (x1, c1, xb, c2)]
    check(
        lambda: T.l2_loss(confidence_blend(*ts), tgtb), ts, [x1, c1, xb, c2]
    )

    # full compensation network, end to end through the loss
    cfg = ModelConfig(base_channels=2, depth=2, mode="stokes_s12", seed=0, dtype="float64")
    model = SnaModel(cfg)
    inputs = ModelInputs(
        rgb=rng.uniform(0, 1, (3, 8, 8)),
        sparse_stokes=rng.uniform(-0.2, 0.2, (3, 8, 8)),
        sparse_four=rng.uniform(0, 0.5, (4, 8, 8)),
        mask=rng.choice([0.0, 1.0], (1, 8, 8)),
    )
    targets = Targets(
        stokes=rng.uniform(-0.3, 0.3, (3, 8, 8)), rgb=rng.uniform(0, 1, (3, 8, 8))
    )

    def full_loss():
        out = model.forward([inputs])
        return compute_loss(out, [targets], 0.1, cfg.mode, np.float64)[0]

    model.store.zero_grads()
    full_loss().backward()
    for name in ("pcn.b1.stem.w", "pcn.b2.head.w", "pcn.ftb0.c1.w", "rgbrn.head.w"):
        g = model.store.tensors[name].grad.copy()
        num = numeric_grad(lambda: float(full_loss().data), model.store.tensors[name].data)
        rel = np.abs(g - num).max() / max(np.abs(num).max(), 1e-8)
        assert rel < 1e-4, f"{name}: rel err {rel}"

    assert time.perf_counter() - t0 < 60.0


def test_05_oracle_equivalence():
    rng = np.random.default_rng(5)
    # joint bilateral against the brute-force double loop
    m = np.zeros((8, 8), dtype=np.uint8)
    m[np.ix_([1, 5], [2, 6])] = 1
    vals = np.where(m == 1, rng.uniform(-0.5, 0.5, (8, 8)), 0.0)
    sparse = StokesImage(vals, 0.5 * vals, -vals)
    guide = RgbImage(*rng.uniform(0, 1, (3, 8, 8)))
    got = interp.joint_bilateral(sparse, PixelMask(m), guide, 1.2, 0.15)
    want = brute_force_joint_bilateral(sparse, PixelMask(m), guide, 1.2, 0.15)
    for a, b in ((got.s0, want.s0), (got.s1, want.s1), (got.s2, want.s2)):
        assert np.abs(a - b).max() < 1e-10

    # SSIM against the naive sliding-window reference
    a = random_rgb(rng, 16, 16)
    b = random_rgb(rng, 16, 16)
    assert abs(metrics.ssim(a, b) - naive_ssim(a, b)) < 1e-8


def test_06_layout_exactness():
    for ratio in (1 / 4, 1 / 16, 1 / 64):
        layout = build_layout("sparse", 64, 64, ratio)
        assert layout.pol_fraction == ratio
    layout = build_layout("sparse", 64, 64, 1 / 16)
    mask = layout.pol_mask
    for ty in range(0, 64, 8):
        for tx in range(0, 64, 8):
            tile = layout.class_grid[ty : ty + 8, tx : tx + 8]
            assert mask[ty : ty + 8, tx : tx + 8].sum() == 4
            assert {3, 4, 5, 6} <= set(tile.ravel().tolist())


def test_07_training_orderings():
    """Desk-scale training smoke: loss decreases, learned beats bilinear,
    s12 formulation beats the four-angle formulation, on >= 4 of 5 seeds."""
    params = SceneParams()
    manifest = make_dataset(64, (0.8, 0.1, 0.1), params, seed=0)
    scenes = {e.index: generate(e.kind, params, e.seed) for e in manifest}

    def prep(entries, base_seed):
        out = []
        for i, e in enumerate(entries):
            cfg = SensorConfig(ratio=1 / 16, noise_factor=0.72, seed=base_seed + i)
            out.append(prepare_sparse_sample(scenes[e.index], 1 / 16, cfg))
        return out

    tr = prep([e for e in manifest if e.split == "train"], 1)
    va = prep([e for e in manifest if e.split == "val"], 500001)
    te = prep([e for e in manifest if e.split == "test"], 900001)

    def rmse(s, gt, nch):
        ds = [s.s1 - gt.s1, s.s2 - gt.s2]
        if nch == 3:
            ds = [s.s0 - gt.s0] + ds
        return float(np.sqrt(np.mean(np.stack(ds) ** 2)))

    bilinear = float(
        np.mean([rmse(reconstruct_sparse(s, "bilinear")[0], s.gt_stokes, 2) for s in te])
    )

    ok_mono = ok_beats = ok_order = 0
    for seed in range(5):
        results = {}
        for mode in ("stokes_s12", "four_angle"):
            t0 = time.perf_counter()
            model, hist = train(
                tr,
                va,
                ModelConfig(mode=mode, seed=seed),
                TrainConfig(epochs=30, batch_size=2, lr=3e-3, seed=seed),
            )
            assert time.perf_counter() - t0 < 900.0
            losses = [h["loss_total"] for h in hist]
            mono5 = all(losses[i + 1] < losses[i] for i in range(4))
            preds = [reconstruct_sparse(s, "sna", model)[0] for s in te]
            results[mode] = (
                mono5,
                float(np.mean([rmse(p, s.gt_stokes, 2) for p, s in zip(preds, te)])),
                float(np.mean([rmse(p, s.gt_stokes, 3) for p, s in zip(preds, te)])),
            )
        ok_mono += results["stokes_s12"][0] and results["four_angle"][0]
        ok_beats += results["stokes_s12"][1] < bilinear
        ok_order += results["stokes_s12"][2] < results["four_angle"][2]

    assert ok_mono >= 4, f"monotone first-5 loss on only {ok_mono}/5 seeds"
    assert ok_beats >= 4, f"beats bilinear on only {ok_beats}/5 seeds"
    assert ok_order >= 4, f"s12 < four-angle ordering on only {ok_order}/5 seeds"


def test_08_structural_properties():
    scene = generate("shapes", SceneParams(height=32, width=32), 8)
    cfg = SensorConfig(ratio=1 / 16, noise_factor=0.72, seed=2)
    sample = prepare_sparse_sample(scene, 1 / 16, cfg)

    # s0 never routes through the compensation network in stokes_s12 mode
    model = SnaModel(ModelConfig(mode="stokes_s12", seed=0))
    before, _ = model.predict(sample.inputs)
    for name, t in model.store.tensors.items():
        if name.startswith("pcn."):
            t.data = t.data + 0.5
    after, _ = model.predict(sample.inputs)
    assert np.array_equal(before.s0, after.s0)
    assert not np.array_equal(before.s1, after.s1)

    # disabling the refinement stage passes the demosaic output through bit-exactly
    plain = SnaModel(ModelConfig(mode="stokes_s12", use_rgbrn=False, seed=0))
    _, rgb = plain.predict(sample.inputs)
    assert np.array_equal(rgb.stack(), np.asarray(sample.inputs.rgb))


def test_09_cli_determinism(tmp_path):
    runner = CliRunner()

    def run_all(root):
        root.mkdir()
        data = root / "data"
        files = []

        def invoke(args):
            res = runner.invoke(cli_main, args)
            assert res.exit_code == 0, res.output

        invoke(["gen", "--n", "4", "--size", "32", "--seed", "3", "--out", str(data)])
        files += sorted(data.iterdir())
        invoke(
            ["capture", "--scene", str(data / "scene_0000.polr"), "--r", "16",
             "--noise", "0.72", "--seed", "1", "--out", str(root / "raw.polr")]
        )
        files.append(root / "raw.polr")
        for method in ("bilinear", "jbf"):
            invoke(
                ["compensate", "--scene", str(data / "scene_0001.polr"), "--r", "16",
                 "--noise", "0.72", "--method", method, "--seed", "2",
                 "--out", str(root / f"{method}.polr")]
            )
            files += [root / f"{method}.polr", root / f"{method}_rgb.polr"]
        invoke(
            ["train", "--data", str(data), "--r", "16", "--epochs", "2", "--seed", "0",
             "--out", str(root / "model.psna")]
        )
        files += [root / "model.psna", root / "model_log.csv"]
        invoke(
            ["bench", "--data", str(data), "--split", "test", "--r", "4,16",
             "--noise", "0.72", "--method", "bilinear,jbf", "--seed", "0",
             "--out", str(root / "bench.csv")]
        )
        files.append(root / "bench.csv")
        invoke(["analyze", "--t", "0.7", "--out", str(root / "curves")])
        files += [root / "curves" / "resolution.csv", root / "curves" / "snr.csv"]
        return files

    a = run_all(tmp_path / "a")
    b = run_all(tmp_path / "b")
    assert len(a) == len(b) and len(a) > 10
    for fa, fb in zip(a, b):
        assert fa.name == fb.name
        assert fa.read_bytes() == fb.read_bytes(), f"{fa.name} differs between runs"
