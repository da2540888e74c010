"""Activation accounting and wall-time benchmarking of the two execution
modes.

The portable ground truth is the closed-form activation count: every
intermediate feature buffer the pipeline allocates, enumerated per stage.
The same buffers are recorded at runtime through the ``recorder`` hook, so
analytic and instrumented counts must agree exactly.  Per-location layer
widths are identical in both modes; only the location set differs, which is
why the trunk ratio between dense and factored mode is exactly
``H * W / ((H + W) * D)``, i.e. ``H / (2 D)`` for square outputs.

Wall-clock numbers are medians over repeats after a warm-up and are
inherently machine-specific; nothing downstream should gate on them tightly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coords import COLUMN, ROW, default_grid_field, grid_coords
from .generator import GeneratorConfig, init_weights, synthesize, synthesize_dense

STAGES = ("input", "trunk", "composed", "fusion", "refinement")
ELEMENT_BYTES = 4  # float32 inference


class ActivationRecorder:
    """Counts every intermediate feature buffer a synthesis pass allocates."""

    def __init__(self):
        self.stages = {name: 0 for name in STAGES}

    def add(self, stage: str, count: int) -> None:
        self.stages[stage] += int(count)

    @property
    def total(self) -> int:
        return sum(self.stages.values())


def activation_breakdown(config: GeneratorConfig, mode: str, height: int, width: int) -> dict:
    """Closed-form per-stage activation element counts for one synthesis.

    Locations: ``(H + W) * D`` trunk positions in factored mode, ``H * W``
    pixels in dense mode; fusion and refinement always run on ``H * W``
    pixels.  Small per-layer tensors (styles, modulated weight matrices) are
    excluded on both the analytic and the instrumented side.
    """
    n = config.num_blocks
    pixels = height * width
    trunk_sites = (height + width) * config.thickness if mode == "biline" else pixels
    per_site = n * (2 * config.hidden_channels + config.residual_channels)

    breakdown = {
        "input": config.fourier_channels * trunk_sites,
        "trunk": per_site * trunk_sites,
    }
    if mode == "biline":
        decoder_body = sum(config.decoder_widths[1:])
        breakdown["composed"] = n * config.residual_channels * pixels
        breakdown["fusion"] = (n * decoder_body + (n - 1) * config.residual_channels) * pixels
    else:
        breakdown["composed"] = 0
        breakdown["fusion"] = (n - 1) * config.residual_channels * pixels
    _, mid, last = config.refinement_widths
    breakdown["refinement"] = (2 * mid + 3 + 2 * last + 3 + 3) * pixels
    breakdown["total"] = sum(breakdown[s] for s in STAGES)
    return breakdown


def count_activations(config: GeneratorConfig, mode: str, height: int, width: int) -> int:
    """Total intermediate elements for one synthesis pass (see breakdown)."""
    return activation_breakdown(config, mode, height, width)["total"]


def trunk_activations(config: GeneratorConfig, mode: str, height: int, width: int) -> int:
    """Per-location stages only (blocks plus projections), the part whose
    cost the factored representation changes."""
    return activation_breakdown(config, mode, height, width)["trunk"]


@dataclass
class BenchRow:
    """One measured (mode, resolution, batch) cell.

    ``activation_elements`` covers the whole batch (images are synthesized
    one after another, so per-image peak memory is ``activation_elements /
    batch * 4`` bytes, but the estimate mirrors a concurrently-held batch the
    way comparable generators run it).
    """

    mode: str
    height: int
    width: int
    batch: int
    parameter_count: int
    activation_elements: int
    peak_bytes_estimate: int
    wall_time_seconds: float | None
    throughput: float | None
    repeats: int
    oom: bool = False

    def as_json(self) -> dict:
        return {
            "mode": self.mode,
            "H": self.height,
            "W": self.width,
            "batch": self.batch,
            "params": self.parameter_count,
            "activation_elements": self.activation_elements,
            "bytes_est": self.peak_bytes_estimate,
            "time_s_median": self.wall_time_seconds,
            "repeats": self.repeats,
        }


def _synthesize_batch(config, weights, height, width, batch):
    images = []
    for seed in range(batch):
        z = np.random.default_rng(seed).normal(0.0, 1.0, config.latent_dim).astype(np.float32)
        if config.mode == "dense":
            images.append(synthesize_dense(z, default_grid_field(height, width), weights, config))
        else:
            e_r = grid_coords(height, axis=ROW)
            e_c = grid_coords(width, axis=COLUMN)
            images.append(synthesize(z, e_r, e_c, weights, config))
    return images


def run_bench(
    config: GeneratorConfig,
    resolutions,
    batches=(1,),
    repeats: int = 3,
    *,
    modes=("biline", "dense"),
    memory_budget_bytes: int = 4 << 30,
) -> list:
    """Measure both modes across resolutions and batch sizes.

    Median of ``repeats`` timed runs after one untimed warm-up; synthesis
    inputs are deterministic (seeds 0..batch-1).  Cells whose estimated
    activation bytes exceed the budget are reported as OOM rows instead of
    being run.  Runs are serial to avoid cross-contamination.
    """
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3, got {repeats}")
    rows = []
    for mode in modes:
        cfg_kwargs = {f: getattr(config, f) for f in config.__dataclass_fields__}
        cfg_kwargs["mode"] = mode
        cfg = GeneratorConfig(**cfg_kwargs)
        weights = init_weights(cfg, seed=0)
        params = weights.num_parameters()
        for res in resolutions:
            height = width = int(res)
            per_image = count_activations(cfg, mode, height, width)
            for batch in batches:
                batch = int(batch)
                elements = per_image * batch
                bytes_est = elements * ELEMENT_BYTES
                if bytes_est > memory_budget_bytes:
                    rows.append(
                        BenchRow(mode, height, width, batch, params, elements, bytes_est,
                                 None, None, repeats, oom=True)
                    )
                    continue
                _synthesize_batch(cfg, weights, height, width, batch)  # warm-up
                times = []
                for _ in range(repeats):
                    start = time.perf_counter()
                    _synthesize_batch(cfg, weights, height, width, batch)
                    times.append(time.perf_counter() - start)
                median = float(np.median(times))
                rows.append(
                    BenchRow(mode, height, width, batch, params, elements, bytes_est,
                             median, batch * height * width / median, repeats)
                )
    return rows


def format_table(rows) -> str:
    header = ("mode", "res", "batch", "params", "activations", "bytes_est", "time_s", "px/s")
    lines = []
    for row in rows:
        if row.oom:
            time_s, rate = "OOM", "-"
        else:
            time_s, rate = f"{row.wall_time_seconds:.4f}", f"{row.throughput:.3e}"
        lines.append(
            (
                row.mode,
                f"{row.height}x{row.width}",
                str(row.batch),
                str(row.parameter_count),
                str(row.activation_elements),
                str(row.peak_bytes_estimate),
                time_s,
                rate,
            )
        )
    widths = [max(len(header[i]), *(len(line[i]) for line in lines)) if lines else len(header[i])
              for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header)]
    out += [fmt.format(*line) for line in lines]
    return "\n".join(out)
