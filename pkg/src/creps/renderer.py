"""User-facing rendering paths on top of the generator.

All paths quantize once, at the very end, with the same mapping
(``clamp((x + 1) / 2) * 255``, round-half-to-even), and all of them inherit
the generator's per-pixel purity, so:

* tiled output is byte-identical to monolithic output for any tiling,
* warped diagonal-sampling output is byte-identical to the per-pixel
  reference renderer,
* the style vector is computed once per latent and shared across tiles.

A configurable activation-memory budget (default 4 GiB) refuses monolithic
renders that would blow up, pointing at tiling instead.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import persistence
from .coords import COLUMN, ROW, CoordField, CoordVector, Transform, grid_coords
from .errors import FormatError, MemoryBudgetError
from .generator import GeneratorConfig, GeneratorWeights, map_latent, synthesize

DEFAULT_BUDGET_BYTES = 4 << 30


@dataclass
class RenderRequest:
    """What to render: resolution, view transform, and the latent source."""

    resolution: tuple[int, int]
    seed: int = 0
    latent: np.ndarray | None = None
    transform: Transform = field(default_factory=Transform)
    tile_size: int | None = None
    output_path: str | None = None

    def __post_init__(self):
        height, width = (int(v) for v in self.resolution)
        self.resolution = (height, width)
        if height < 1 or width < 1:
            raise ValueError(f"resolution must be >= 1 per axis, got {self.resolution}")
        if self.tile_size is not None:
            self.tile_size = int(self.tile_size)
            if not 1 <= self.tile_size <= min(height, width):
                raise ValueError(
                    f"tile_size must lie in [1, {min(height, width)}], got {self.tile_size}"
                )


def latent_for(request: RenderRequest, config: GeneratorConfig) -> np.ndarray:
    if request.latent is not None:
        return np.asarray(request.latent, dtype=np.float32)
    rng = np.random.default_rng(request.seed)
    return rng.normal(0.0, 1.0, config.latent_dim).astype(np.float32)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """(3, H, W) unclamped reals -> (H, W, 3) uint8 via clamp((x+1)/2)*255.

    Rounding is half-to-even; quantization is the only lossy step in the
    render paths and always runs exactly once.
    """
    v = np.clip((np.asarray(image, dtype=np.float32) + 1.0) * 0.5, 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8).transpose(1, 2, 0)


def _check_budget(config, height, width, budget_bytes):
    from .bench import count_activations

    est = count_activations(config, config.mode, height, width) * 4
    if est > budget_bytes:
        raise MemoryBudgetError(
            f"monolithic {height}x{width} synthesis needs about {est / 2**30:.2f} GiB of "
            f"activations (budget {budget_bytes / 2**30:.2f} GiB); render tiled instead"
        )


def render(
    request: RenderRequest,
    weights: GeneratorWeights,
    config: GeneratorConfig,
    *,
    memory_budget_bytes: int = DEFAULT_BUDGET_BYTES,
) -> np.ndarray:
    """One monolithic synthesis over the transformed pixel-center grid."""
    height, width = request.resolution
    _check_budget(config, height, width, memory_budget_bytes)
    z = latent_for(request, config)
    e_r = grid_coords(height, request.transform, ROW)
    e_c = grid_coords(width, request.transform, COLUMN)
    return to_uint8(synthesize(z, e_r, e_c, weights, config))


def _tile_ranges(n, tile):
    return [(lo, min(lo + tile, n)) for lo in range(0, n, tile)]


def render_tiled(
    request: RenderRequest,
    weights: GeneratorWeights,
    config: GeneratorConfig,
    *,
    threads: int = 1,
    memory_budget_bytes: int = DEFAULT_BUDGET_BYTES,
) -> np.ndarray:
    """Partition the grid into tiles, synthesize each, reassemble.

    The style vector is computed once and reused; each tile sees the exact
    coordinate values of its slice of the full grid, so the reassembled image
    is byte-identical to ``render`` of the same request.
    """
    height, width = request.resolution
    tile = request.tile_size if request.tile_size is not None else min(height, width)
    _check_budget(config, min(tile, height), min(tile, width), memory_budget_bytes)
    z = latent_for(request, config)
    style = map_latent(z, weights, config.leaky_slope)
    e_r = grid_coords(height, request.transform, ROW)
    e_c = grid_coords(width, request.transform, COLUMN)

    out = np.empty((3, height, width), dtype=np.float32)
    jobs = [
        (r0, r1, c0, c1)
        for r0, r1 in _tile_ranges(height, tile)
        for c0, c1 in _tile_ranges(width, tile)
    ]

    def run(job):
        r0, r1, c0, c1 = job
        sub_r = CoordVector(e_r.values[r0:r1], ROW)
        sub_c = CoordVector(e_c.values[c0:c1], COLUMN)
        out[:, r0:r1, c0:c1] = synthesize(z, sub_r, sub_c, weights, config, style=style)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, jobs))
    else:
        for job in jobs:
            run(job)
    return to_uint8(out)


def render_warped(
    latent: np.ndarray,
    fld: CoordField,
    weights: GeneratorWeights,
    config: GeneratorConfig,
    *,
    threads: int = 1,
    memory_budget_bytes: int = DEFAULT_BUDGET_BYTES,
) -> np.ndarray:
    """Warped rendering by row-by-row diagonal sampling.

    For output row ``i`` the row coordinates ``rows[i, :]`` and column
    coordinates ``cols[i, :]`` form a width x width intermediate whose
    diagonal is exactly that output row.  One intermediate per row, nothing
    batched, with ``render_pixelwise`` as the independent check.  Row batches
    are always ``width`` long; non-square fields simply have a different
    number of rows.
    """
    height, width = fld.shape
    _check_budget(config, width, width, memory_budget_bytes)
    z = np.asarray(latent, dtype=np.float32)
    style = map_latent(z, weights, config.leaky_slope)
    out = np.empty((3, height, width), dtype=np.float32)

    def run(i):
        e_r = CoordVector(fld.rows[i, :], ROW)
        e_c = CoordVector(fld.cols[i, :], COLUMN)
        block = synthesize(z, e_r, e_c, weights, config, style=style)
        out[:, i, :] = block[:, np.arange(width), np.arange(width)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(height)))
    else:
        for i in range(height):
            run(i)
    return to_uint8(out)


def render_pixelwise(
    latent: np.ndarray,
    fld: CoordField,
    weights: GeneratorWeights,
    config: GeneratorConfig,
) -> np.ndarray:
    """Reference renderer: one synthesis call per pixel.

    Ground truth for warped rendering; costs H*W synthesis calls, so keep the
    resolutions small.
    """
    height, width = fld.shape
    z = np.asarray(latent, dtype=np.float32)
    style = map_latent(z, weights, config.leaky_slope)
    out = np.empty((3, height, width), dtype=np.float32)
    for i in range(height):
        for j in range(width):
            e_r = CoordVector(fld.rows[i : i + 1, j], ROW)
            e_c = CoordVector(fld.cols[i : i + 1, j], COLUMN)
            out[:, i, j] = synthesize(z, e_r, e_c, weights, config, style=style)[:, 0, 0]
    return to_uint8(out)


def write_image(pixels: np.ndarray, path) -> None:
    """Write (H, W, 3) uint8 pixels; PPM always, PNG when Pillow is present."""
    path = str(path)
    if path.lower().endswith(".png"):
        persistence.write_png(pixels, path)
    elif path.lower().endswith(".ppm"):
        persistence.write_ppm(pixels, path)
    else:
        raise FormatError(f"unsupported image extension on {path!r} (use .ppm or .png)")


def read_image(path) -> np.ndarray:
    """Read an image into (3, H, W) float64 values in [0, 1] (value / 255)."""
    path = str(path)
    if path.lower().endswith(".png"):
        pixels = persistence.read_png(path)
    else:
        pixels = persistence.read_ppm(path)
    return pixels.astype(np.float64).transpose(2, 0, 1) / 255.0
