import json

import numpy as np
import pytest
from click.testing import CliRunner

from polarsim import polrio
from polarsim.cli import main
from polarsim.errors import ParameterError
from polarsim.images import RgbImage, StokesImage
from polarsim.scenegen import SceneParams, generate


def test_polr_round_trip(tmp_path, rng):
    planes = [rng.uniform(-2, 2, (8, 6)).astype(np.float32).astype(np.float64) for _ in range(3)]
    path = tmp_path / "x.polr"
    polrio.write_polr(path, ["a", "b", "c"], planes)
    names, back = polrio.read_polr(path)
    assert names == ["a", "b", "c"]
    for p, q in zip(planes, back):
        assert np.array_equal(p, q)  # float32-representable data is bit-exact


def test_polr_errors(tmp_path):
    with pytest.raises(ParameterError):
        polrio.write_polr(tmp_path / "y.polr", ["a"], [np.zeros((2, 2)), np.zeros((2, 2))])
    bad = tmp_path / "bad.polr"
    bad.write_bytes(b"JUNK")
    with pytest.raises(ParameterError):
        polrio.read_polr(bad)
    trunc = tmp_path / "trunc.polr"
    trunc.write_bytes(b"POLR1\nwidth 4\nheight 4\nchannels 1\nnames a\n\n\x00\x00")
    with pytest.raises(ParameterError):
        polrio.read_polr(trunc)


def test_scene_and_stokes_io(tmp_path):
    scene = generate("checker", SceneParams(height=16, width=16), 3)
    polrio.save_scene(tmp_path / "s.polr", scene)
    back = polrio.load_scene(tmp_path / "s.polr")
    assert np.allclose(back.rgb.r, scene.rgb.r, atol=1e-6)
    assert np.allclose(back.aolp_field, scene.aolp_field, atol=1e-4)
    s = scene.gray_stokes()
    polrio.save_stokes(tmp_path / "st.polr", s)
    rt = polrio.load_stokes(tmp_path / "st.polr")
    assert np.allclose(rt.s1, s.s1, atol=1e-6)
    with pytest.raises(ParameterError):
        polrio.load_stokes(tmp_path / "s.polr")  # wrong channel set


def test_config_parsing():
    cfg = polrio.parse_config_text(
        "# comment\nseed = 5\nt=0.6 # trailing\n\nseed=7\n"
    )
    assert cfg == {"seed": "7", "t": "0.6"}
    with pytest.raises(ParameterError):
        polrio.parse_config_text("no equals sign")


def test_png_export(tmp_path, rng):
    polrio.export_png(tmp_path / "p.png", [rng.uniform(0, 1, (8, 8)) for _ in range(3)])
    assert (tmp_path / "p.png").stat().st_size > 0


# ----------------------------------------------------------------------
# CLI


@pytest.fixture
def runner():
    return CliRunner()


def _gen(runner, path, n=4, size=32, seed=0):
    res = runner.invoke(
        main, ["gen", "--n", str(n), "--size", str(size), "--seed", str(seed), "--out", str(path)]
    )
    assert res.exit_code == 0, res.output
    return res


def test_cli_gen_manifest(runner, tmp_path):
    _gen(runner, tmp_path / "data")
    with open(tmp_path / "data" / "manifest.json") as f:
        manifest = json.load(f)
    assert len(manifest["scenes"]) == 4
    assert {r["split"] for r in manifest["scenes"]} == {"train", "val", "test"}
    for rec in manifest["scenes"]:
        assert (tmp_path / "data" / rec["file"]).exists()


def test_cli_capture_and_compensate(runner, tmp_path):
    _gen(runner, tmp_path / "data")
    scene = str(tmp_path / "data" / "scene_0000.polr")
    res = runner.invoke(
        main,
        ["capture", "--scene", scene, "--r", "16", "--noise", "0.72", "--seed", "1",
         "--out", str(tmp_path / "raw.polr"), "--layout-out", str(tmp_path / "layout.txt")],
    )
    assert res.exit_code == 0, res.output
    text = (tmp_path / "layout.txt").read_text().splitlines()
    assert text[0].startswith("04GG")
    assert text[1].startswith("91GG")
    res = runner.invoke(
        main,
        ["compensate", "--scene", scene, "--r", "16", "--method", "jbf",
         "--out", str(tmp_path / "rec.polr")],
    )
    assert res.exit_code == 0, res.output
    stokes = polrio.load_stokes(tmp_path / "rec.polr")
    assert stokes.s0.shape == (32, 32)
    assert (tmp_path / "rec_rgb.polr").exists()


def test_cli_config_precedence(runner, tmp_path):
    _gen(runner, tmp_path / "data")
    scene = str(tmp_path / "data" / "scene_0000.polr")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=3\nnoise=0.72\n")

    def cap(out, extra):
        res = runner.invoke(
            main,
            ["capture", "--scene", scene, "--config", str(cfg), "--out", str(out)] + extra,
        )
        assert res.exit_code == 0, res.output

    cap(tmp_path / "a.polr", [])
    cap(tmp_path / "b.polr", [])
    # config-driven runs are reproducible
    assert (tmp_path / "a.polr").read_bytes() == (tmp_path / "b.polr").read_bytes()
    # explicit flag beats the config value
    cap(tmp_path / "c.polr", ["--seed", "9"])
    assert (tmp_path / "a.polr").read_bytes() != (tmp_path / "c.polr").read_bytes()


def test_cli_eval_output(runner, tmp_path, rng):
    s = StokesImage(*rng.uniform(0.2, 0.8, (3, 16, 16)))
    polrio.save_stokes(tmp_path / "p.polr", s)
    polrio.save_stokes(tmp_path / "g.polr", s)
    res = runner.invoke(
        main, ["eval", "--pred", str(tmp_path / "p.polr"), "--gt", str(tmp_path / "g.polr")]
    )
    assert res.exit_code == 0, res.output
    lines = dict(l.split(",") for l in res.output.strip().splitlines())
    assert float(lines["rmse_s012"]) == 0.0
    assert lines["dolp_psnr_db"] == "inf"


def test_cli_analyze_golden(runner, tmp_path):
    res = runner.invoke(main, ["analyze", "--t", "0.7", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    rows = (tmp_path / "resolution.csv").read_text().splitlines()
    assert rows[0] == "r,rgb_factor,pol_factor"
    assert "0.0625,3.75,0.0625" in rows
    snr = dict(
        line.split(",") for line in (tmp_path / "snr.csv").read_text().splitlines()[1:]
    )
    assert float(snr["0.7"]) == pytest.approx(np.sqrt(1 / 1.4), abs=1e-8)


def test_cli_bench_csv(runner, tmp_path):
    _gen(runner, tmp_path / "data")
    out = tmp_path / "bench.csv"
    res = runner.invoke(
        main,
        ["bench", "--data", str(tmp_path / "data"), "--split", "test", "--r", "4",
         "--noise", "0.72", "--method", "bilinear", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "# polarsim-bench-v1"
    assert lines[1].startswith("sensor,r,f_n,method")
    assert any(line.startswith("conventional,0,0.72,binned") for line in lines)
    assert any(line.startswith("sparse,0.25,0.72,bilinear") for line in lines)


def test_cli_bench_sna_needs_model(runner, tmp_path):
    _gen(runner, tmp_path / "data")
    res = runner.invoke(
        main,
        ["bench", "--data", str(tmp_path / "data"), "--method", "sna",
         "--out", str(tmp_path / "b.csv")],
    )
    assert res.exit_code != 0
