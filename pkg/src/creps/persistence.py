"""Bit-exact file formats: weight containers, JSON configs, coordinate
fields, PPM images, CSV traces and bench reports.

All binary formats are little-endian with fixed magics:

* Weight container ``CREPSW01``: u32 entry count, then per entry a u16 name
  length, UTF-8 name, u8 rank, rank u32 dims, and row-major float32 data.
* Coordinate field ``CFLD0001``: u32 height, u32 width, then height*width
  (row, col) float32 pairs in row-major order.
* Images: binary PPM (``P6``, maxval 255) is the mandatory round-trip format;
  PNG is read/written through Pillow when it is installed.

Malformed inputs raise the typed errors from ``creps.errors``; loads never
return partial structures.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .coords import CoordField
from .errors import (
    BadMagicError,
    ConfigError,
    DuplicateNameError,
    FormatError,
    LengthMismatchError,
    TruncatedFileError,
)
from .generator import GeneratorConfig

WEIGHT_MAGIC = b"CREPSW01"
FIELD_MAGIC = b"CFLD0001"


@dataclass
class ContainerEntry:
    """Raw container entry; ``dims`` may disagree with the data on purpose
    only in tests, save_container validates the product."""

    name: str
    dims: tuple
    data: np.ndarray


def _as_entry(item) -> ContainerEntry:
    if isinstance(item, ContainerEntry):
        data = np.asarray(item.data, dtype="<f4").reshape(-1)
        return ContainerEntry(item.name, tuple(int(d) for d in item.dims), data)
    name, arr = item
    arr = np.asarray(arr, dtype="<f4")
    return ContainerEntry(str(name), arr.shape, arr.reshape(-1))


def save_container(entries, path) -> None:
    """Write (name, array) pairs or ContainerEntry objects; order preserved."""
    prepared = [_as_entry(e) for e in entries]
    seen = set()
    for entry in prepared:
        if entry.name in seen:
            raise DuplicateNameError(f"duplicate entry name {entry.name!r}")
        seen.add(entry.name)
        expected = int(np.prod(entry.dims)) if entry.dims else 1
        if expected != entry.data.size:
            raise LengthMismatchError(
                f"entry {entry.name!r} declares dims {entry.dims} "
                f"({expected} values) but carries {entry.data.size}"
            )
    buf = io.BytesIO()
    buf.write(WEIGHT_MAGIC)
    buf.write(struct.pack("<I", len(prepared)))
    for entry in prepared:
        raw = entry.name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", len(entry.dims)))
        for d in entry.dims:
            buf.write(struct.pack("<I", d))
        buf.write(entry.data.tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_container(path):
    """Read a weight container back into ordered (name, float32 array) pairs."""
    with open(path, "rb") as f:
        blob = f.read()
    view = memoryview(blob)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise TruncatedFileError(f"container ends inside {what} (offset {pos})")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    magic = bytes(take(len(WEIGHT_MAGIC), "magic"))
    if magic != WEIGHT_MAGIC:
        raise BadMagicError(f"expected magic {WEIGHT_MAGIC!r}, got {magic!r}")
    (count,) = struct.unpack("<I", take(4, "entry count"))
    entries = []
    seen = set()
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = bytes(take(name_len, "name")).decode("utf-8")
        if name in seen:
            raise DuplicateNameError(f"duplicate entry name {name!r}")
        seen.add(name)
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims")) if rank else ()
        n_values = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(4 * n_values, f"data of {name!r}"), dtype="<f4")
        entries.append((name, data.reshape(dims).copy()))
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after the last entry")
    return entries


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(GeneratorConfig)}


def config_to_dict(config: GeneratorConfig) -> dict:
    out = dataclasses.asdict(config)
    out["decoder_widths"] = list(config.decoder_widths)
    out["refinement_widths"] = list(config.refinement_widths)
    return out


def config_from_dict(doc: dict) -> GeneratorConfig:
    """Strict config decode: unknown keys rejected, absent keys defaulted."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config document must be a JSON object, got {type(doc).__name__}")
    unknown = set(doc) - set(_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in ("decoder_widths", "refinement_widths"):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{key} must be a list of integers")
            value = tuple(value)
        kwargs[key] = value
    try:
        return GeneratorConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> GeneratorConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(config: GeneratorConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(config), f, indent=2, sort_keys=True)
        f.write("\n")


def write_coord_field(field: CoordField, path) -> None:
    height, width = field.shape
    pairs = np.empty((height, width, 2), dtype="<f4")
    pairs[:, :, 0] = field.rows
    pairs[:, :, 1] = field.cols
    with open(path, "wb") as f:
        f.write(FIELD_MAGIC)
        f.write(struct.pack("<II", height, width))
        f.write(pairs.tobytes())


def read_coord_field(path) -> CoordField:
    with open(path, "rb") as f:
        blob = f.read()
    head = len(FIELD_MAGIC) + 8
    if len(blob) < head:
        raise TruncatedFileError("coordinate field file ends inside the header")
    if blob[: len(FIELD_MAGIC)] != FIELD_MAGIC:
        raise BadMagicError(
            f"expected magic {FIELD_MAGIC!r}, got {blob[: len(FIELD_MAGIC)]!r}"
        )
    height, width = struct.unpack("<II", blob[len(FIELD_MAGIC) : head])
    if height < 1 or width < 1:
        raise FormatError(f"coordinate field declares empty shape {height}x{width}")
    need = head + height * width * 8
    if len(blob) < need:
        raise TruncatedFileError("coordinate field file ends inside the payload")
    if len(blob) > need:
        raise FormatError(f"{len(blob) - need} trailing bytes after the coordinate payload")
    pairs = np.frombuffer(blob, dtype="<f4", offset=head).reshape(height, width, 2)
    return CoordField(pairs[:, :, 0].astype(np.float64), pairs[:, :, 1].astype(np.float64))


def write_ppm(pixels: np.ndarray, path) -> None:
    """Binary PPM, maxval 255; pixels are (H, W, 3) uint8."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError(f"pixels must be (H, W, 3) uint8, got {pixels.shape} {pixels.dtype}")
    height, width = pixels.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 2:
        raise TruncatedFileError("image file is too short for a PPM header")
    magic = blob[:2]
    if magic != b"P6":
        raise BadMagicError(f"expected binary PPM magic b'P6', got {magic!r}")

    # Header tokens separated by whitespace, '#' comments run to end of line.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(blob):
            raise TruncatedFileError("PPM header ends before width/height/maxval")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos : pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"non-numeric PPM header fields: {tokens}") from exc
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise FormatError(f"PPM declares empty image {width}x{height}")
    pos += 1  # exactly one whitespace byte before the payload
    need = width * height * 3
    payload = blob[pos : pos + need]
    if len(payload) < need:
        raise TruncatedFileError("PPM payload is shorter than width*height*3 bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def write_png(pixels: np.ndarray, path) -> None:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise FormatError("PNG support requires Pillow; write a .ppm instead") from exc
    Image.fromarray(np.asarray(pixels), mode="RGB").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise FormatError("PNG support requires Pillow; read a .ppm instead") from exc
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_trace(values, path) -> None:
    """Loss trace as two-column CSV with an ``iteration,mse`` header."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("iteration,mse\n")
        for i, v in enumerate(values):
            f.write(f"{i},{float(v)!r}\n")


def read_trace(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().strip().splitlines()
    if not lines or lines[0] != "iteration,mse":
        raise FormatError("trace CSV must start with an 'iteration,mse' header")
    return np.array([float(line.split(",")[1]) for line in lines[1:]], dtype=np.float64)


def write_bench_report(rows, path) -> None:
    """Machine-readable bench report; one object per (mode, res, batch) cell."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump([row.as_json() for row in rows], f, indent=2)
        f.write("\n")
