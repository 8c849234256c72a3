"""POLR float-plane container, PNG export, and key=value configs.

POLR layout (bit-exact, any channel count):
    magic line  "POLR1\\n"
    ASCII lines "width W", "height H", "channels C", "names a,b,c"
    one blank line
    C row-major float32 little-endian planes
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .images import RgbImage, StokesImage
from .scenegen import Scene

MAGIC = b"POLR1\n"


def write_polr(path, names: list[str], planes: list[np.ndarray]) -> None:
    if len(names) != len(planes):
        raise ParameterError("names and planes must have equal length")
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise ParameterError(f"planes disagree on shape: {sorted(shapes)}")
    h, w = planes[0].shape
    header = (
        f"width {w}\nheight {h}\nchannels {len(planes)}\n"
        f"names {','.join(names)}\n\n"
    )
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header.encode("ascii"))
        for p in planes:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def read_polr(path) -> tuple[list[str], list[np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ParameterError(f"{path}: not a POLR file")
        fields = {}
        while True:
            line = b""
            while not line.endswith(b"\n"):
                ch = f.read(1)
                if not ch:
                    raise ParameterError(f"{path}: truncated header")
                line += ch
            text = line.decode("ascii").rstrip("\n")
            if text == "":
                break
            key, _, value = text.partition(" ")
            fields[key] = value
        try:
            w = int(fields["width"])
            h = int(fields["height"])
            c = int(fields["channels"])
            names = fields["names"].split(",")
        except KeyError as e:
            raise ParameterError(f"{path}: missing header field {e}") from None
        if len(names) != c:
            raise ParameterError(f"{path}: {c} channels but {len(names)} names")
        planes = []
        for _ in range(c):
            buf = f.read(4 * h * w)
            if len(buf) != 4 * h * w:
                raise ParameterError(f"{path}: truncated plane data")
            planes.append(np.frombuffer(buf, dtype="<f4").reshape(h, w).astype(np.float64))
    return names, planes


# ----------------------------------------------------------------------
def save_scene(path, scene: Scene) -> None:
    write_polr(
        path,
        ["r", "g", "b", "dolp", "aolp"],
        [scene.rgb.r, scene.rgb.g, scene.rgb.b, scene.dolp_field, scene.aolp_field],
    )


def load_scene(path) -> Scene:
    names, planes = read_polr(path)
    want = ["r", "g", "b", "dolp", "aolp"]
    if names != want:
        raise ParameterError(f"{path}: expected channels {want}, got {names}")
    return Scene(RgbImage(planes[0], planes[1], planes[2]), planes[3], planes[4])


def save_stokes(path, s: StokesImage) -> None:
    write_polr(path, ["s0", "s1", "s2"], [s.s0, s.s1, s.s2])


def load_stokes(path) -> StokesImage:
    names, planes = read_polr(path)
    if names != ["s0", "s1", "s2"]:
        raise ParameterError(f"{path}: expected Stokes channels, got {names}")
    return StokesImage(*planes)


def save_rgb(path, img: RgbImage) -> None:
    write_polr(path, ["r", "g", "b"], [img.r, img.g, img.b])


def load_rgb(path) -> RgbImage:
    names, planes = read_polr(path)
    if names != ["r", "g", "b"]:
        raise ParameterError(f"{path}: expected RGB channels, got {names}")
    return RgbImage(*planes)


def export_png(path, planes: list[np.ndarray]) -> None:
    """8-bit gamma-2.2 preview (1 plane = grayscale, 3 = RGB). Visual aid only."""
    from PIL import Image

    arr = np.stack(planes, axis=-1) if len(planes) == 3 else planes[0]
    arr = np.clip(arr, 0.0, 1.0) ** (1.0 / 2.2)
    img = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8))
    img.save(path)


# ----------------------------------------------------------------------
def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_config(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())
