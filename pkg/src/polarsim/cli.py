"""Command-line harness: scene generation, capture, reconstruction, training,
evaluation, benchmarking, and analytic sensor curves.

Every command is reproducible: a config file plus seeds fully determine
the outputs. Config files are flat key=value text; explicit command-line
flags always win over config values.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import experiment, pipeline, polrio
from .errors import PolarsimError
from .images import StokesImage
from .nn.model import ModelConfig
from .nn.train import TrainConfig, history_to_csv, load_checkpoint, save_checkpoint, train
from .scenegen import SceneParams, generate, make_dataset
from .sensor import SensorConfig, build_layout, capture, resolution_analysis, snr_analysis


def _resolve(ctx, name: str, cfg: dict, cast, default):
    """Flag value if given explicitly, else config-file value, else default."""
    src = ctx.get_parameter_source(name)
    val = ctx.params.get(name)
    if src is not None and src.name != "DEFAULT":
        return val
    if name in cfg:
        return cast(cfg[name])
    return default


def _load_cfg(config_path) -> dict:
    return polrio.read_config(config_path) if config_path else {}


def _ratio_from_denominator(denom: int) -> float:
    return 1.0 / float(denom)


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None
)


@click.group()
def main():
    """Sparse polarization sensor simulation and recovery toolkit."""


@main.command("gen")
@click.option("--n", default=8, show_default=True, help="number of scenes")
@click.option("--size", default=64, show_default=True, help="square scene size")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@config_option
@click.pass_context
def cmd_gen(ctx, n, size, seed, out, config):
    """Generate a procedural scene dataset with train/val/test manifest."""
    cfg = _load_cfg(config)
    n = _resolve(ctx, "n", cfg, int, n)
    size = _resolve(ctx, "size", cfg, int, size)
    seed = _resolve(ctx, "seed", cfg, int, seed)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    params = SceneParams(height=size, width=size)
    manifest = make_dataset(n, (0.8, 0.1, 0.1), params, seed=seed)
    records = []
    for entry in manifest:
        scene = generate(entry.kind, params, entry.seed)
        fname = f"scene_{entry.index:04d}.polr"
        polrio.save_scene(outdir / fname, scene)
        records.append(
            {
                "index": entry.index,
                "kind": entry.kind,
                "seed": entry.seed,
                "split": entry.split,
                "file": fname,
            }
        )
    with open(outdir / "manifest.json", "w") as f:
        json.dump({"size": size, "seed": seed, "scenes": records}, f, indent=2, sort_keys=True)
    click.echo(f"wrote {n} scenes to {outdir}")


def _sensor_config(ctx, cfg, t, noise, seed, r_denom) -> SensorConfig:
    return SensorConfig(
        ratio=_ratio_from_denominator(r_denom),
        transmittance=t,
        noise_factor=noise,
        seed=seed,
    )


@main.command("capture")
@click.option("--scene", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--layout", "layout_kind", type=click.Choice(["conventional", "sparse"]), default="sparse", show_default=True)
@click.option("--r", "r_denom", default=16, show_default=True, help="polarization ratio denominator")
@click.option("--t", default=0.7, show_default=True, help="polarizer transmittance")
@click.option("--noise", default=0.0, show_default=True, help="shot noise factor")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--layout-out", type=click.Path(dir_okay=False), default=None, help="also dump the pixel-class text grid")
@config_option
@click.pass_context
def cmd_capture(ctx, scene, layout_kind, r_denom, t, noise, seed, out, layout_out, config):
    """Simulate one sensor exposure of a scene; writes a raw POLR frame."""
    cfg = _load_cfg(config)
    r_denom = _resolve(ctx, "r_denom", {**cfg, "r_denom": cfg.get("r", r_denom)}, int, r_denom)
    t = _resolve(ctx, "t", cfg, float, t)
    noise = _resolve(ctx, "noise", cfg, float, noise)
    seed = _resolve(ctx, "seed", cfg, int, seed)
    sc = polrio.load_scene(scene)
    sensor_cfg = _sensor_config(ctx, cfg, t, noise, seed, r_denom)
    layout = build_layout(
        layout_kind, sc.rgb.height, sc.rgb.width,
        sensor_cfg.ratio if layout_kind == "sparse" else None,
    )
    raw = capture(sc.channel_stokes(), layout, sensor_cfg)
    polrio.write_polr(out, ["raw"], [raw.values])
    if layout_out:
        Path(layout_out).write_text(layout.text())
    click.echo(f"wrote {out}")


@main.command("compensate")
@click.option("--scene", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--r", "r_denom", default=16, show_default=True)
@click.option("--t", default=0.7, show_default=True)
@click.option("--noise", default=0.0, show_default=True)
@click.option("--method", type=click.Choice(["bilinear", "jbf", "sna"]), default="bilinear", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="output Stokes POLR; RGB goes to *_rgb.polr")
@config_option
@click.pass_context
def cmd_compensate(ctx, scene, r_denom, t, noise, method, model_path, seed, out, config):
    """Capture a sparse frame and reconstruct dense Stokes + RGB."""
    cfg = _load_cfg(config)
    r_denom = _resolve(ctx, "r_denom", {**cfg, "r_denom": cfg.get("r", r_denom)}, int, r_denom)
    t = _resolve(ctx, "t", cfg, float, t)
    noise = _resolve(ctx, "noise", cfg, float, noise)
    seed = _resolve(ctx, "seed", cfg, int, seed)
    sc = polrio.load_scene(scene)
    sensor_cfg = _sensor_config(ctx, cfg, t, noise, seed, r_denom)
    sample = experiment.prepare_sparse_sample(sc, sensor_cfg.ratio, sensor_cfg)
    model = load_checkpoint(model_path) if model_path else None
    stokes, rgb = experiment.reconstruct_sparse(sample, method, model)
    polrio.save_stokes(out, stokes)
    rgb_path = str(Path(out).with_name(Path(out).stem + "_rgb.polr"))
    polrio.save_rgb(rgb_path, rgb)
    click.echo(f"wrote {out} and {rgb_path}")


def _load_dataset(data_dir: Path):
    with open(data_dir / "manifest.json") as f:
        manifest = json.load(f)
    by_split = {"train": [], "val": [], "test": []}
    for rec in manifest["scenes"]:
        by_split[rec["split"]].append(polrio.load_scene(data_dir / rec["file"]))
    return by_split


@main.command("train")
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--r", "r_denom", default=16, show_default=True)
@click.option("--t", default=0.7, show_default=True)
@click.option("--noise", default=0.72, show_default=True)
@click.option("--mode", type=click.Choice(["four_angle", "stokes_full", "stokes_s12"]), default="stokes_s12", show_default=True)
@click.option("--epochs", default=30, show_default=True)
@click.option("--batch", default=2, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="checkpoint path; training log goes to *_log.csv")
@config_option
@click.pass_context
def cmd_train(ctx, data, r_denom, t, noise, mode, epochs, batch, lr, seed, out, config):
    """Train the toy compensation model on a generated dataset."""
    cfg = _load_cfg(config)
    r_denom = _resolve(ctx, "r_denom", {**cfg, "r_denom": cfg.get("r", r_denom)}, int, r_denom)
    t = _resolve(ctx, "t", cfg, float, t)
    noise = _resolve(ctx, "noise", cfg, float, noise)
    seed = _resolve(ctx, "seed", cfg, int, seed)
    splits = _load_dataset(Path(data))
    sensor_cfg = SensorConfig(
        ratio=_ratio_from_denominator(r_denom), transmittance=t,
        noise_factor=noise, seed=seed,
    )

    def prep(scenes, base):
        out_list = []
        for i, sc in enumerate(scenes):
            c = SensorConfig(
                ratio=sensor_cfg.ratio, transmittance=t, noise_factor=noise,
                seed=base + i,
            )
            s = experiment.prepare_sparse_sample(sc, c.ratio, c)
            out_list.append((s.inputs, s.targets))
        return out_list

    train_set = prep(splits["train"], seed * 1000 + 1)
    val_set = prep(splits["val"], seed * 1000 + 500001)
    model_cfg = ModelConfig(mode=mode, gain=0.5 * t, seed=seed)
    train_cfg = TrainConfig(epochs=epochs, batch_size=batch, lr=lr, seed=seed)
    model, history = train(train_set, val_set, model_cfg, train_cfg)
    save_checkpoint(out, model)
    log_path = str(Path(out).with_name(Path(out).stem + "_log.csv"))
    history_to_csv(history, log_path)
    click.echo(
        f"trained {mode} model ({model.param_count()} params), "
        f"best val s12 RMSE {min(h['val_s12_rmse'] for h in history):.6f}"
    )
    click.echo(f"wrote {out} and {log_path}")


@main.command("eval")
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred-rgb", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--gt-rgb", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_eval(pred, gt, pred_rgb, gt_rgb):
    """Compare predicted against ground-truth Stokes (and optionally RGB)."""
    from . import metrics

    ps = polrio.load_stokes(pred)
    gs = polrio.load_stokes(gt)
    rows = [
        ("rmse_s012", metrics.rmse(ps, gs, "all")),
        ("rmse_s12", metrics.rmse(ps, gs, "s12_only")),
        ("dolp_psnr_db", metrics.dolp_psnr(ps, gs)),
        ("aolp_err_deg", metrics.aolp_error(ps, gs)),
    ]
    if pred_rgb and gt_rgb:
        pr = polrio.load_rgb(pred_rgb)
        gr = polrio.load_rgb(gt_rgb)
        rows.append(("rgb_psnr_db", metrics.rgb_psnr(pr, gr)))
        rows.append(("rgb_ssim", metrics.ssim(pr, gr)))
    for name, value in rows:
        click.echo(f"{name},{experiment.format_float(value)}")


@main.command("bench")
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", type=click.Choice(["train", "val", "test", "all"]), default="test", show_default=True)
@click.option("--r", "r_denoms", default="4,16,64", show_default=True, help="comma-separated ratio denominators")
@click.option("--noise", default="0.72,3.6", show_default=True, help="comma-separated noise factors")
@click.option("--method", "methods", default="bilinear,jbf", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--t", default=0.7, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@config_option
@click.pass_context
def cmd_bench(ctx, data, split, r_denoms, noise, methods, model_path, t, seed, out, config):
    """Run the sensor/ratio/noise/method evaluation grid; writes CSV."""
    cfg = _load_cfg(config)
    t = _resolve(ctx, "t", cfg, float, t)
    seed = _resolve(ctx, "seed", cfg, int, seed)
    splits = _load_dataset(Path(data))
    scenes = (
        splits["train"] + splits["val"] + splits["test"]
        if split == "all"
        else splits[split]
    )
    if not scenes:
        raise click.ClickException(f"no scenes in split {split!r}")
    ratios = tuple(1.0 / int(d) for d in r_denoms.split(","))
    noise_factors = tuple(float(v) for v in noise.split(","))
    method_list = tuple(m.strip() for m in methods.split(","))
    model = load_checkpoint(model_path) if model_path else None
    if "sna" in method_list and model is None:
        raise click.ClickException("method 'sna' requires --model")
    base = SensorConfig(transmittance=t, seed=seed)
    rows = experiment.run_bench(
        scenes, ratios=ratios, noise_factors=noise_factors,
        methods=method_list, config=base, model=model,
    )
    experiment.write_bench_csv(rows, out)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command("analyze")
@click.option("--t", default=0.7, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@config_option
@click.pass_context
def cmd_analyze(ctx, t, out, config):
    """Write analytic resolution and SNR trade-off curves as CSV."""
    cfg = _load_cfg(config)
    t = _resolve(ctx, "t", cfg, float, t)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "resolution.csv", "w", newline="") as f:
        f.write("r,rgb_factor,pol_factor\n")
        for denom in (1, 2, 4, 8, 16, 32, 64, 128, 256):
            rep = resolution_analysis(1.0 / denom)
            f.write(
                f"{experiment.format_float(1.0 / denom)},"
                f"{experiment.format_float(rep.rgb_factor)},"
                f"{experiment.format_float(rep.pol_factor)}\n"
            )
    with open(outdir / "snr.csv", "w", newline="") as f:
        f.write("t,snr_ratio\n")
        for tv in sorted({round(0.1 * k, 2) for k in range(1, 11)} | {t}):
            rep = snr_analysis(SensorConfig(transmittance=tv))
            f.write(
                f"{experiment.format_float(tv)},"
                f"{experiment.format_float(rep.rgb_snr_ratio)}\n"
            )
    click.echo(f"wrote {outdir / 'resolution.csv'} and {outdir / 'snr.csv'}")


def entry():  # pragma: no cover
    try:
        main()
    except PolarsimError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":  # pragma: no cover
    entry()
