"""Scene-to-sample preparation, reconstruction methods, and the benchmark grid.

Scale convention: captures behind a polarizer are camera-referred, i.e.
scaled by transmittance/2 relative to the scene's gray Stokes planes.
Ground truth Stokes targets are converted to the same scale before any
loss or metric; RGB stays in scene units because regular pixels read
their channel unattenuated (conventional-sensor RGB is digitally
re-gained by 2/transmittance for comparability).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import interp, metrics, pipeline
from .errors import ParameterError
from .images import PixelMask, RgbImage, StokesImage
from .nn.model import ModelInputs, SnaModel
from .nn.train import Targets
from .scenegen import Scene
from .sensor import SensorConfig, build_layout, capture, tile_side_for_ratio

SPARSE_METHODS = ("bilinear", "jbf", "sna")


@dataclass
class PreparedSample:
    """Everything downstream consumers need from one sparse capture."""

    inputs: ModelInputs
    targets: Targets
    rgb_demosaic: RgbImage
    sparse_stokes: StokesImage
    mask: PixelMask
    gt_stokes: StokesImage  # camera-referred
    gt_rgb: RgbImage
    ratio: float


def camera_referred(s: StokesImage, transmittance: float) -> StokesImage:
    g = 0.5 * transmittance
    return StokesImage(g * s.s0, g * s.s1, g * s.s2)


def prepare_sparse_sample(
    scene: Scene, ratio: float, config: SensorConfig
) -> PreparedSample:
    layout = build_layout("sparse", scene.rgb.height, scene.rgb.width, ratio)
    raw = capture(scene.channel_stokes(), layout, config)
    rgb_dm, four_sparse, mask = pipeline.demosaic_sparse(raw)
    pooled, _ = pipeline.pooled_sparse_stokes(four_sparse, layout)
    gt_stokes = camera_referred(scene.gray_stokes(), config.transmittance)
    inputs = ModelInputs(
        rgb=rgb_dm.stack(),
        sparse_stokes=pooled.stack(),
        sparse_four=four_sparse.stack(),
        mask=mask.m[None].astype(np.float64),
    )
    targets = Targets(stokes=gt_stokes.stack(), rgb=scene.rgb.stack())
    return PreparedSample(
        inputs, targets, rgb_dm, pooled, mask, gt_stokes, scene.rgb, ratio
    )


def reconstruct_sparse(
    sample: PreparedSample, method: str, model: SnaModel | None = None
) -> tuple[StokesImage, RgbImage]:
    """Dense Stokes + RGB estimate from one prepared sparse capture."""
    if method == "bilinear":
        return (
            interp.interp_bilinear_scattered(sample.sparse_stokes, sample.mask),
            sample.rgb_demosaic,
        )
    if method == "jbf":
        sigma_s = interp.default_sigma_s(tile_side_for_ratio(sample.ratio))
        return (
            interp.joint_bilateral(
                sample.sparse_stokes, sample.mask, sample.rgb_demosaic, sigma_s, 0.1
            ),
            sample.rgb_demosaic,
        )
    if method == "sna":
        if model is None:
            raise ParameterError("method 'sna' needs a trained model")
        return model.predict(sample.inputs)
    raise ParameterError(f"unknown method {method!r}")


def reconstruct_conventional(
    scene: Scene, config: SensorConfig
) -> tuple[StokesImage, RgbImage]:
    """Conventional-sensor output upsampled back to full resolution."""
    layout = build_layout("conventional", scene.rgb.height, scene.rgb.width)
    raw = capture(scene.channel_stokes(), layout, config)
    rgb_half, _ = pipeline.bin_conventional(raw)
    stokes_half = pipeline.conventional_gray_stokes(raw)
    up = pipeline.upsample_bilinear
    stokes = StokesImage(up(stokes_half.s0, 2), up(stokes_half.s1, 2), up(stokes_half.s2, 2))
    regain = 2.0 / config.transmittance
    rgb = RgbImage(
        np.clip(regain * up(rgb_half.r, 2), 0, None),
        np.clip(regain * up(rgb_half.g, 2), 0, None),
        np.clip(regain * up(rgb_half.b, 2), 0, None),
    )
    return stokes, rgb


def evaluate(
    pred_stokes: StokesImage,
    pred_rgb: RgbImage,
    gt_stokes: StokesImage,
    gt_rgb: RgbImage,
) -> dict[str, float]:
    return {
        "rmse_s012": metrics.rmse(pred_stokes, gt_stokes, "all"),
        "rmse_s12": metrics.rmse(pred_stokes, gt_stokes, "s12_only"),
        "dolp_psnr_db": metrics.dolp_psnr(pred_stokes, gt_stokes),
        "aolp_err_deg": metrics.aolp_error(pred_stokes, gt_stokes),
        "rgb_psnr_db": metrics.rgb_psnr(pred_rgb, gt_rgb),
        "rgb_ssim": metrics.ssim(pred_rgb, gt_rgb),
    }


BENCH_COLUMNS = (
    "sensor",
    "r",
    "f_n",
    "method",
    "rmse_s012",
    "rmse_s12",
    "dolp_psnr_db",
    "aolp_err_deg",
    "rgb_psnr_db",
    "rgb_ssim",
)
BENCH_SCHEMA = "polarsim-bench-v1"


def _mean_rows(per_image: list[dict[str, float]]) -> dict[str, float]:
    # metrics averaged per image first, then across images
    return {k: float(np.mean([r[k] for r in per_image])) for k in per_image[0]}


def _bench_point(
    scenes: list[Scene],
    sensor: str,
    ratio: float,
    f_n: float,
    method: str,
    base_config: SensorConfig,
    model: SnaModel | None,
) -> dict:
    results = []
    for i, scene in enumerate(scenes):
        cfg = replace(base_config, noise_factor=f_n, seed=base_config.seed + 7919 * i)
        gt_stokes = camera_referred(scene.gray_stokes(), cfg.transmittance)
        if sensor == "conventional":
            pred_s, pred_rgb = reconstruct_conventional(scene, cfg)
        else:
            cfg = replace(cfg, ratio=ratio)
            sample = prepare_sparse_sample(scene, ratio, cfg)
            pred_s, pred_rgb = reconstruct_sparse(sample, method, model)
        results.append(evaluate(pred_s, pred_rgb, gt_stokes, scene.rgb))
    row = {"sensor": sensor, "r": ratio, "f_n": f_n, "method": method}
    row.update(_mean_rows(results))
    return row


def run_bench(
    scenes: list[Scene],
    ratios: tuple[float, ...] = (1 / 4, 1 / 16, 1 / 64),
    noise_factors: tuple[float, ...] = (0.72, 3.6),
    methods: tuple[str, ...] = ("bilinear", "jbf"),
    config: SensorConfig | None = None,
    model: SnaModel | None = None,
    include_conventional: bool = True,
) -> list[dict]:
    """Full evaluation grid; rows come back deterministically sorted."""
    config = config or SensorConfig()
    points = []
    for f_n in noise_factors:
        if include_conventional:
            points.append(("conventional", 0.0, f_n, "binned"))
        for r in ratios:
            for method in methods:
                points.append(("sparse", r, f_n, method))

    threads = int(os.environ.get("POLARSIM_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(
                    lambda p: _bench_point(scenes, p[0], p[1], p[2], p[3], config, model),
                    points,
                )
            )
    else:
        rows = [_bench_point(scenes, *p, config, model) for p in points]
    rows.sort(key=lambda r: (r["sensor"], r["r"], r["f_n"], r["method"]))
    return rows


def write_bench_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# {BENCH_SCHEMA}\n")
        f.write(",".join(BENCH_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in BENCH_COLUMNS:
                v = row[col]
                cells.append(v if isinstance(v, str) else format_float(v))
            f.write(",".join(cells) + "\n")


def format_float(v: float) -> str:
    if v == float("inf"):
        return "inf"
    return f"{v:.9g}"
