"""The synthesis pipeline: mapping network, style-modulated pixel-wise blocks
on factored row/column features, per-layer residual projections, layer-wise
fusion through narrow decoders, and a final refinement stage producing RGB.

There are no spatial operators anywhere: every layer mixes channels at a
single location (a (position, thickness-slot) pair on the factored halves, or
a pixel on dense maps).  The RGB value at a coordinate is therefore a pure
function of (latent, row coordinate, column coordinate, weights), which is
what makes arbitrary-scale, tiled and warped rendering agree bit-for-bit.

Two execution modes share one weight set:

* ``biline`` keeps the trunk factored and composes each block's 32-channel
  residual into a dense map before fusion (the main path).
* ``dense`` runs the same blocks on per-pixel features throughout and sums
  residual maps directly, skipping the decoders; it exists as the
  quadratic-memory baseline for the bench.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biline import BilineFeature, compose
from .coords import COLUMN, ROW, CoordVector, FourierParams, fourier_encode, init_fourier_params
from .linops import equalized, leaky_relu, ordered_matmul

MODES = ("biline", "dense")


@dataclass
class GeneratorConfig:
    latent_dim: int = 64
    style_dim: int = 64
    mapping_layers: int = 2
    num_blocks: int = 6
    hidden_channels: int = 128
    residual_channels: int = 32
    thickness: int = 8
    fourier_channels: int = 32
    decoder_widths: tuple = (32, 64, 128, 64, 32)
    refinement_widths: tuple = (32, 128, 64)
    leaky_slope: float = 0.2
    demod_epsilon: float = 1e-8
    mode: str = "biline"

    def __post_init__(self):
        self.decoder_widths = tuple(int(w) for w in self.decoder_widths)
        self.refinement_widths = tuple(int(w) for w in self.refinement_widths)
        for name in (
            "latent_dim",
            "style_dim",
            "mapping_layers",
            "num_blocks",
            "hidden_channels",
            "residual_channels",
            "thickness",
            "fourier_channels",
        ):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            setattr(self, name, int(value))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.decoder_widths) < 2 or any(w < 1 for w in self.decoder_widths):
            raise ValueError(f"decoder_widths must be >= 2 positive widths, got {self.decoder_widths}")
        if (
            self.decoder_widths[0] != self.residual_channels
            or self.decoder_widths[-1] != self.residual_channels
        ):
            raise ValueError(
                "decoder_widths must start and end at residual_channels "
                f"({self.residual_channels}), got {self.decoder_widths}"
            )
        if len(self.refinement_widths) != 3 or any(w < 1 for w in self.refinement_widths):
            raise ValueError(f"refinement_widths must be 3 positive widths, got {self.refinement_widths}")
        if self.refinement_widths[0] != self.residual_channels:
            raise ValueError(
                f"refinement_widths[0] must equal residual_channels, got {self.refinement_widths}"
            )
        if not (np.isfinite(self.leaky_slope) and np.isfinite(self.demod_epsilon)):
            raise ValueError("leaky_slope and demod_epsilon must be finite")
        if self.demod_epsilon <= 0:
            raise ValueError(f"demod_epsilon must be > 0, got {self.demod_epsilon}")
        if self.mode == "dense" and self.fourier_channels % 2:
            raise ValueError(
                "fourier_channels must be even in dense mode "
                "(half the channels encode each axis per pixel)"
            )


@dataclass
class AffineLayer:
    """Raw N(0, 1) weight (out, in) plus bias; scaled by 1/sqrt(in) at use."""

    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ModulatedLayer:
    """Channel-mixing layer whose weight is rescaled per style vector."""

    weight: np.ndarray
    bias: np.ndarray
    style: AffineLayer


@dataclass
class BlockWeights:
    first: ModulatedLayer
    second: ModulatedLayer


@dataclass
class DecoderWeights:
    layers: list


@dataclass
class RefinementWeights:
    block_a: BlockWeights
    rgb_a: ModulatedLayer
    block_b: BlockWeights
    rgb_b: ModulatedLayer


@dataclass
class GeneratorWeights:
    mapping: list
    fourier: FourierParams
    blocks: list
    projections: list
    decoders: list
    refinement: RefinementWeights

    def num_parameters(self) -> int:
        return sum(arr.size for _, arr in weights_to_entries(self))


def init_weights(config: GeneratorConfig, seed: int, fourier_sigma: float = 8.0) -> GeneratorWeights:
    """Deterministic random weights: affine weights ~ N(0, 1), biases zero.

    Scaling by 1/sqrt(fan_in) happens at use time, so a unit-variance input
    yields roughly unit-variance pre-activations regardless of layer width.
    Draw order is fixed (mapping, sinusoid banks, blocks, projections,
    decoders, refinement), making weights byte-identical per (config, seed).
    """
    rng = np.random.default_rng(seed)
    dt = np.float32

    def affine(out_dim, in_dim):
        w = rng.normal(0.0, 1.0, (out_dim, in_dim)).astype(dt)
        return AffineLayer(w, np.zeros(out_dim, dtype=dt))

    def modulated(out_dim, in_dim):
        w = rng.normal(0.0, 1.0, (out_dim, in_dim)).astype(dt)
        bias = np.zeros(out_dim, dtype=dt)
        return ModulatedLayer(w, bias, affine_style(in_dim))

    def affine_style(channels):
        w = rng.normal(0.0, 1.0, (channels, config.style_dim)).astype(dt)
        return AffineLayer(w, np.zeros(channels, dtype=dt))

    def block(in_dim, out_dim):
        return BlockWeights(modulated(out_dim, in_dim), modulated(out_dim, out_dim))

    mapping = []
    in_dim = config.latent_dim
    for _ in range(config.mapping_layers):
        mapping.append(affine(config.style_dim, in_dim))
        in_dim = config.style_dim

    fourier = init_fourier_params(
        config.fourier_channels, config.thickness, rng, sigma=fourier_sigma, dtype=dt
    )

    blocks = []
    in_dim = config.fourier_channels
    for _ in range(config.num_blocks):
        blocks.append(block(in_dim, config.hidden_channels))
        in_dim = config.hidden_channels

    projections = [
        modulated(config.residual_channels, config.hidden_channels)
        for _ in range(config.num_blocks)
    ]

    decoders = []
    for _ in range(config.num_blocks):
        layers = [
            affine(config.decoder_widths[k + 1], config.decoder_widths[k])
            for k in range(len(config.decoder_widths) - 1)
        ]
        decoders.append(DecoderWeights(layers))

    res, mid, last = config.refinement_widths
    refinement = RefinementWeights(
        block_a=block(res, mid),
        rgb_a=modulated(3, mid),
        block_b=block(mid, last),
        rgb_b=modulated(3, last),
    )
    return GeneratorWeights(mapping, fourier, blocks, projections, decoders, refinement)


def map_latent(z: np.ndarray, weights: GeneratorWeights, slope: float = 0.2) -> np.ndarray:
    """Latent to style vector: RMS-normalize, then the mapping MLP."""
    z = np.asarray(z)
    expected = weights.mapping[0].weight.shape[1]
    if z.ndim != 1 or z.shape[0] != expected:
        raise ValueError(f"latent must be a vector of length {expected}, got shape {z.shape}")
    guard = np.asarray(1e-8, dtype=z.dtype)
    h = z / np.sqrt(np.mean(z * z) + guard)
    for layer in weights.mapping:
        h = leaky_relu(equalized(layer.weight) @ h + layer.bias, slope)
    return h


def modulation_matrix(
    layer: ModulatedLayer, style: np.ndarray, demodulate: bool, epsilon: float = 1e-8
) -> np.ndarray:
    """Effective (out, in) weight for one style vector.

    Per input channel scale ``s = style_affine(style)``, weight columns are
    multiplied by ``s``; with demodulation each output row is renormalized to
    unit length (plus ``epsilon`` under the square root).
    """
    s = equalized(layer.style.weight) @ style + layer.style.bias
    m = equalized(layer.weight) * s[None, :]
    if demodulate:
        denom = np.sqrt(np.sum(m * m, axis=1) + np.asarray(epsilon, dtype=m.dtype))
        m = m / denom[:, None]
    return m


def _modulated_batch(layer, style, x, demodulate, activate, slope, epsilon, recorder, stage):
    """Apply one modulated layer over a (channels, locations) batch."""
    m = modulation_matrix(layer, style, demodulate, epsilon)
    y = ordered_matmul(m, x)
    y += layer.bias[:, None]
    if activate:
        y = leaky_relu(y, slope)
    if recorder is not None:
        recorder.add(stage, y.size)
    return y


def modulated_linear(
    x: np.ndarray,
    style: np.ndarray,
    layer: ModulatedLayer,
    demodulate: bool = True,
    *,
    epsilon: float = 1e-8,
    slope: float = 0.2,
    activate: bool = True,
) -> np.ndarray:
    """Modulated channel mix of one location vector or a (C, n) batch."""
    x = np.asarray(x)
    single = x.ndim == 1
    x2 = x[:, None] if single else x
    y = _modulated_batch(layer, style, x2, demodulate, activate, slope, epsilon, None, "")
    return y[:, 0] if single else y


def _block_batch(block, style, x, slope, epsilon, recorder, stage):
    x = _modulated_batch(block.first, style, x, True, True, slope, epsilon, recorder, stage)
    return _modulated_batch(block.second, style, x, True, True, slope, epsilon, recorder, stage)


def synthesis_block(feature, style, block, *, slope: float = 0.2, epsilon: float = 1e-8):
    """Two modulated layers applied independently at every location.

    ``feature`` is either a BilineFeature (locations are (position, slot)
    pairs across both halves) or a dense (C, H, W) array (locations are
    pixels).  No noise injection, no resampling: the receptive field is
    exactly one location.
    """
    if isinstance(feature, BilineFeature):
        height = feature.height
        joined = np.concatenate([feature.row_half, feature.col_half], axis=1)
        flat = joined.reshape(joined.shape[0], -1)
        out = _block_batch(block, style, flat, slope, epsilon, None, "")
        out = out.reshape(out.shape[0], joined.shape[1], joined.shape[2])
        return BilineFeature(out[:, :height, :], out[:, height:, :])
    feature = np.asarray(feature)
    if feature.ndim != 3:
        raise ValueError(f"dense feature must be (C, H, W), got shape {feature.shape}")
    flat = feature.reshape(feature.shape[0], -1)
    out = _block_batch(block, style, flat, slope, epsilon, None, "")
    return out.reshape(out.shape[0], feature.shape[1], feature.shape[2])


def _decoder_batch(decoder, x, slope, recorder):
    last = len(decoder.layers) - 1
    for k, layer in enumerate(decoder.layers):
        x = ordered_matmul(equalized(layer.weight), x)
        x += layer.bias[:, None]
        if k < last:
            x = leaky_relu(x, slope)
        if recorder is not None:
            recorder.add("fusion", x.size)
    return x


def _refine_batch(x, style, refinement, slope, epsilon, recorder):
    a = _block_batch(refinement.block_a, style, x, slope, epsilon, recorder, "refinement")
    rgb = _modulated_batch(
        refinement.rgb_a, style, a, False, False, slope, epsilon, recorder, "refinement"
    )
    b = _block_batch(refinement.block_b, style, a, slope, epsilon, recorder, "refinement")
    rgb2 = _modulated_batch(
        refinement.rgb_b, style, b, False, False, slope, epsilon, recorder, "refinement"
    )
    total = rgb + rgb2
    if recorder is not None:
        recorder.add("refinement", total.size)
    return total


def _check_weights(weights: GeneratorWeights, config: GeneratorConfig):
    if weights.fourier.channels != config.fourier_channels:
        raise ValueError(
            f"weights carry {weights.fourier.channels} sinusoid channels, "
            f"config expects {config.fourier_channels}"
        )
    if weights.fourier.thickness != config.thickness:
        raise ValueError(
            f"weights carry thickness {weights.fourier.thickness}, config expects {config.thickness}"
        )
    if len(weights.blocks) != config.num_blocks:
        raise ValueError(
            f"weights carry {len(weights.blocks)} blocks, config expects {config.num_blocks}"
        )


def synthesize(
    z: np.ndarray,
    row_coords: CoordVector,
    col_coords: CoordVector,
    weights: GeneratorWeights,
    config: GeneratorConfig,
    *,
    style: np.ndarray | None = None,
    recorder=None,
    tap=None,
) -> np.ndarray:
    """Render unclamped RGB (3, H, W) float32 over a separable coordinate grid.

    Pipeline: encode each axis into a factored first-layer feature, run the
    modulated trunk on both halves, project each block to a 32-channel
    factored residual, compose it densely, fuse the composed maps through the
    per-layer decoders, then refine to RGB with two dense modulated blocks
    whose skip outputs are summed.

    Pass ``style`` to reuse a precomputed style vector (tiled rendering); it
    is identical to ``map_latent(z, weights)`` by construction.  ``tap``, when
    given, receives every intermediate dense map as ``tap(kind, index, array)``
    with kind "composed" (per-layer composed residual), "fused" (running
    fusion state), or "final" (the map entering refinement); arrays are
    (channels, H, W) views for inspection only.
    """
    if config.mode != "biline":
        raise ValueError(f"synthesize requires mode 'biline', config says {config.mode!r}")
    _check_weights(weights, config)
    height, width = len(row_coords), len(col_coords)
    if height < 1 or width < 1:
        raise ValueError("coordinate vectors must be non-empty")
    if row_coords.axis != ROW or col_coords.axis != COLUMN:
        raise ValueError("pass a row-axis and a column-axis coordinate vector, in that order")
    w = map_latent(z, weights, config.leaky_slope) if style is None else style

    row0 = fourier_encode(row_coords, weights.fourier)
    col0 = fourier_encode(col_coords, weights.fourier)
    joined = np.concatenate([row0, col0], axis=1)
    x = joined.reshape(config.fourier_channels, -1)
    if recorder is not None:
        recorder.add("input", x.size)

    slope, eps = config.leaky_slope, config.demod_epsilon
    res = config.residual_channels
    fused = None
    for l in range(config.num_blocks):
        x = _block_batch(weights.blocks[l], w, x, slope, eps, recorder, "trunk")
        proj = _modulated_batch(
            weights.projections[l], w, x, False, False, slope, eps, recorder, "trunk"
        )
        halves = proj.reshape(res, height + width, config.thickness)
        residual = BilineFeature(halves[:, :height, :], halves[:, height:, :])
        composed = compose(residual)
        if recorder is not None:
            recorder.add("composed", composed.size)
        if tap is not None:
            tap("composed", l, composed)
        flat = composed.reshape(res, height * width)
        if fused is None:
            fused = flat
        else:
            fused = _decoder_batch(weights.decoders[l - 1], fused, slope, recorder) + flat
            if recorder is not None:
                recorder.add("fusion", fused.size)
        if tap is not None:
            tap("fused", l, fused.reshape(res, height, width))
    fused = _decoder_batch(weights.decoders[config.num_blocks - 1], fused, slope, recorder)
    if tap is not None:
        tap("final", config.num_blocks, fused.reshape(res, height, width))
    rgb = _refine_batch(fused, w, weights.refinement, slope, eps, recorder)
    return rgb.reshape(3, height, width)


def _encode_pixel_pairs(field, fourier: FourierParams, channels: int) -> np.ndarray:
    """Per-pixel encoding for dense mode: half the channels from each axis.

    Uses thickness slot 0 of each axis bank so the layer widths (and thus the
    weight set) match the factored path exactly.
    """
    half = channels // 2
    row_freq, row_phase = fourier.for_axis(ROW)
    col_freq, col_phase = fourier.for_axis(COLUMN)
    dt = row_freq.dtype
    r = np.asarray(field.rows, dtype=dt).reshape(-1)
    c = np.asarray(field.cols, dtype=dt).reshape(-1)
    two_pi = np.asarray(2.0 * np.pi, dtype=dt)
    out = np.empty((channels, r.size), dtype=dt)
    out[:half] = np.sin(two_pi * (row_freq[:half, 0, None] * r[None, :] + row_phase[:half, 0, None]))
    out[half:] = np.sin(two_pi * (col_freq[:half, 0, None] * c[None, :] + col_phase[:half, 0, None]))
    return out


def synthesize_dense(
    z: np.ndarray,
    field,
    weights: GeneratorWeights,
    config: GeneratorConfig,
    *,
    style: np.ndarray | None = None,
    recorder=None,
) -> np.ndarray:
    """Quadratic-memory baseline: the same blocks over per-pixel features.

    Residual 32-channel maps are summed directly (no decoders); refinement is
    shared with the factored path.  Every operation is per-pixel, so one
    pixel's output depends only on that pixel's coordinates.
    """
    if config.mode != "dense":
        raise ValueError(f"synthesize_dense requires mode 'dense', config says {config.mode!r}")
    _check_weights(weights, config)
    height, width = field.shape
    if height < 1 or width < 1:
        raise ValueError("coordinate field must be non-empty")
    w = map_latent(z, weights, config.leaky_slope) if style is None else style

    x = _encode_pixel_pairs(field, weights.fourier, config.fourier_channels)
    if recorder is not None:
        recorder.add("input", x.size)

    slope, eps = config.leaky_slope, config.demod_epsilon
    fused = None
    for l in range(config.num_blocks):
        x = _block_batch(weights.blocks[l], w, x, slope, eps, recorder, "trunk")
        proj = _modulated_batch(
            weights.projections[l], w, x, False, False, slope, eps, recorder, "trunk"
        )
        if fused is None:
            fused = proj
        else:
            fused = fused + proj
            if recorder is not None:
                recorder.add("fusion", fused.size)
    rgb = _refine_batch(fused, w, weights.refinement, slope, eps, recorder)
    return rgb.reshape(3, height, width)


def weights_to_entries(weights: GeneratorWeights):
    """Flatten weights into ordered (name, array) pairs for the container."""
    entries = []
    for i, layer in enumerate(weights.mapping):
        entries += [(f"mapping.{i}.weight", layer.weight), (f"mapping.{i}.bias", layer.bias)]
    f = weights.fourier
    entries += [
        ("fourier.row.freq", f.row_freq),
        ("fourier.row.phase", f.row_phase),
        ("fourier.col.freq", f.col_freq),
        ("fourier.col.phase", f.col_phase),
    ]

    def mod(prefix, layer):
        return [
            (f"{prefix}.weight", layer.weight),
            (f"{prefix}.bias", layer.bias),
            (f"{prefix}.style.weight", layer.style.weight),
            (f"{prefix}.style.bias", layer.style.bias),
        ]

    for l, block in enumerate(weights.blocks):
        entries += mod(f"block.{l}.fc0", block.first) + mod(f"block.{l}.fc1", block.second)
    for l, proj in enumerate(weights.projections):
        entries += mod(f"proj.{l}", proj)
    for l, dec in enumerate(weights.decoders):
        for k, layer in enumerate(dec.layers):
            entries += [(f"decoder.{l}.{k}.weight", layer.weight), (f"decoder.{l}.{k}.bias", layer.bias)]
    r = weights.refinement
    entries += mod("refine.block0.fc0", r.block_a.first)
    entries += mod("refine.block0.fc1", r.block_a.second)
    entries += mod("refine.rgb0", r.rgb_a)
    entries += mod("refine.block1.fc0", r.block_b.first)
    entries += mod("refine.block1.fc1", r.block_b.second)
    entries += mod("refine.rgb1", r.rgb_b)
    return entries


def entries_to_weights(entries, config: GeneratorConfig) -> GeneratorWeights:
    """Rebuild GeneratorWeights from container entries, validating the shape set.

    The entry names and shapes must match ``config`` exactly; a reference
    weight set initialized from the config defines the expectation.
    """
    entries = list(entries)
    table = dict(entries)
    if len(table) != len(entries):
        raise ValueError("duplicate entry names in weight container")
    reference = init_weights(config, seed=0)
    expected = weights_to_entries(reference)
    missing = [name for name, _ in expected if name not in table]
    if missing:
        raise ValueError(f"weight container is missing entries: {missing[:4]}...")
    extra = set(table) - {name for name, _ in expected}
    if extra:
        raise ValueError(f"weight container has unexpected entries: {sorted(extra)[:4]}...")

    def pull(name, like):
        arr = np.asarray(table[name], dtype=np.float32)
        if arr.shape != like.shape:
            raise ValueError(f"entry {name!r} has shape {arr.shape}, expected {like.shape}")
        return arr

    for name, like in expected:
        table[name] = pull(name, like)

    def mod(prefix):
        return ModulatedLayer(
            table[f"{prefix}.weight"],
            table[f"{prefix}.bias"],
            AffineLayer(table[f"{prefix}.style.weight"], table[f"{prefix}.style.bias"]),
        )

    mapping = [
        AffineLayer(table[f"mapping.{i}.weight"], table[f"mapping.{i}.bias"])
        for i in range(config.mapping_layers)
    ]
    fourier = FourierParams(
        table["fourier.row.freq"],
        table["fourier.row.phase"],
        table["fourier.col.freq"],
        table["fourier.col.phase"],
    )
    blocks = [
        BlockWeights(mod(f"block.{l}.fc0"), mod(f"block.{l}.fc1"))
        for l in range(config.num_blocks)
    ]
    projections = [mod(f"proj.{l}") for l in range(config.num_blocks)]
    decoders = [
        DecoderWeights(
            [
                AffineLayer(table[f"decoder.{l}.{k}.weight"], table[f"decoder.{l}.{k}.bias"])
                for k in range(len(config.decoder_widths) - 1)
            ]
        )
        for l in range(config.num_blocks)
    ]
    refinement = RefinementWeights(
        BlockWeights(mod("refine.block0.fc0"), mod("refine.block0.fc1")),
        mod("refine.rgb0"),
        BlockWeights(mod("refine.block1.fc0"), mod("refine.block1.fc1")),
        mod("refine.rgb1"),
    )
    return GeneratorWeights(mapping, fourier, blocks, projections, decoders, refinement)
