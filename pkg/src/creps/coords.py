"""Normalized image-plane coordinates, geometric transforms, and the learned
sinusoidal encoding that turns scalar coordinates into first-layer features.

Conventions (fixed here, tested everywhere):

* Pixel centers: a length-``n`` axis samples ``e_i = -1 + (2*i + 1) / n``,
  symmetric about 0 and strictly inside [-1, 1].
* Transforms scale first, then shift: ``e' = scale * e + shift``.  A scale
  above 1 zooms out (the grid covers more of the scene), below 1 zooms in.
* A positive rotation angle rotates the sampling grid counter-clockwise in
  the (row, col) plane, which reads as a clockwise image rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROW = "row"
COLUMN = "column"
_AXES = (ROW, COLUMN)


@dataclass(frozen=True)
class Transform:
    """Similarity transform of a coordinate axis: scale then shift."""

    shift_row: float = 0.0
    shift_col: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise ValueError(f"scale must be finite and > 0, got {self.scale}")
        if not (np.isfinite(self.shift_row) and np.isfinite(self.shift_col)):
            raise ValueError("shifts must be finite")

    def shift_for(self, axis: str) -> float:
        return self.shift_row if axis == ROW else self.shift_col

    def apply(self, values: np.ndarray, axis: str) -> np.ndarray:
        return self.scale * values + self.shift_for(axis)

    def invert(self, values: np.ndarray, axis: str) -> np.ndarray:
        """Algebraic inverse: ``e = (e' - shift) / scale``."""
        return (values - self.shift_for(axis)) / self.scale


IDENTITY = Transform()


def _check_axis(axis: str) -> str:
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
    return axis


@dataclass
class CoordVector:
    """1-D array of normalized coordinates tagged with the axis they sample."""

    values: np.ndarray
    axis: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("coordinate values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("coordinate values must be finite")
        _check_axis(self.axis)

    def __len__(self) -> int:
        return self.values.shape[0]

    def take(self, indices) -> "CoordVector":
        return CoordVector(self.values[np.asarray(indices)], self.axis)


def grid_coords(resolution: int, transform: Transform = IDENTITY, axis: str = ROW) -> CoordVector:
    """Pixel-center grid for one axis, after the given transform.

    ``e_i = -1 + (2*i + 1) / resolution`` for ``i = 0 .. resolution-1``, then
    ``e' = scale * e + shift`` with the shift matching ``axis``.
    """
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    _check_axis(axis)
    i = np.arange(resolution, dtype=np.float64)
    base = -1.0 + (2.0 * i + 1.0) / resolution
    return CoordVector(transform.apply(base, axis), axis)


@dataclass
class FourierParams:
    """Learned sinusoid banks for both axes.

    Each axis owns an independent (channels x thickness) set of frequencies
    and phases; distinct parameters per thickness slot keep the slots from
    collapsing onto each other.  Phases are in cycles (multiplied by 2*pi at
    evaluation time).
    """

    row_freq: np.ndarray
    row_phase: np.ndarray
    col_freq: np.ndarray
    col_phase: np.ndarray
    sigma: float = 8.0

    def __post_init__(self):
        arrays = (self.row_freq, self.row_phase, self.col_freq, self.col_phase)
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1 or arrays[0].ndim != 2:
            raise ValueError(f"all four parameter arrays must share one 2-D shape, got {shapes}")
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise ValueError("sinusoid parameters must be finite")

    @property
    def channels(self) -> int:
        return self.row_freq.shape[0]

    @property
    def thickness(self) -> int:
        return self.row_freq.shape[1]

    def for_axis(self, axis: str):
        _check_axis(axis)
        if axis == ROW:
            return self.row_freq, self.row_phase
        return self.col_freq, self.col_phase


def init_fourier_params(
    channels: int, thickness: int, rng: np.random.Generator, sigma: float = 8.0, dtype=np.float32
) -> FourierParams:
    """Draw frequencies ~ N(0, sigma^2) and phases ~ U[0, 1) for both axes."""

    def bank():
        freq = rng.normal(0.0, sigma, (channels, thickness)).astype(dtype)
        phase = rng.random((channels, thickness)).astype(dtype)
        return freq, phase

    row_freq, row_phase = bank()
    col_freq, col_phase = bank()
    return FourierParams(row_freq, row_phase, col_freq, col_phase, sigma=sigma)


def fourier_encode(coords: CoordVector, params: FourierParams) -> np.ndarray:
    """Encode coordinates into a (channels, n, thickness) feature block.

    ``out[k, i, d] = sin(2*pi * (freq[k, d] * e_i + phase[k, d]))`` using the
    parameter set of the coordinate's axis.  Purely per-position: the slice at
    ``i`` depends only on ``e_i``, so index restriction commutes exactly with
    encoding.
    """
    freq, phase = params.for_axis(coords.axis)
    e = np.asarray(coords.values, dtype=freq.dtype)
    arg = freq[:, None, :] * e[None, :, None] + phase[:, None, :]
    two_pi = np.asarray(2.0 * np.pi, dtype=freq.dtype)
    return np.sin(two_pi * arg)


@dataclass
class CoordField:
    """Per-pixel (row, col) coordinates for warped sampling."""

    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.cols = np.asarray(self.cols, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape != self.cols.shape:
            raise ValueError(
                f"rows and cols must share a 2-D shape, got {self.rows.shape} vs {self.cols.shape}"
            )
        if not (np.all(np.isfinite(self.rows)) and np.all(np.isfinite(self.cols))):
            raise ValueError("coordinate fields must be finite")

    @property
    def shape(self):
        return self.rows.shape


def default_grid_field(height: int, width: int) -> CoordField:
    """Pixel-center grid as a field: ``rows[i, j] = e_r[i]``, ``cols[i, j] = e_c[j]``."""
    e_r = grid_coords(height, axis=ROW).values
    e_c = grid_coords(width, axis=COLUMN).values
    rows = np.repeat(e_r[:, None], width, axis=1)
    cols = np.repeat(e_c[None, :], height, axis=0)
    return CoordField(rows, cols)


def rotation_field(angle: float, height: int, width: int) -> CoordField:
    """Default grid rotated by ``angle`` radians about the image center."""
    base = default_grid_field(height, width)
    c, s = np.cos(angle), np.sin(angle)
    return CoordField(c * base.rows - s * base.cols, s * base.rows + c * base.cols)


def elastic_field(row_shift: np.ndarray, col_shift: np.ndarray) -> CoordField:
    """Default grid plus per-pixel displacements (one (H, W) array per axis)."""
    row_shift = np.asarray(row_shift, dtype=np.float64)
    col_shift = np.asarray(col_shift, dtype=np.float64)
    if row_shift.ndim != 2 or row_shift.shape != col_shift.shape:
        raise ValueError("displacement arrays must share a 2-D shape")
    base = default_grid_field(*row_shift.shape)
    return CoordField(base.rows + row_shift, base.cols + col_shift)


def make_coord_field(
    kind: str,
    resolution: tuple[int, int] | None = None,
    *,
    angle: float = 0.0,
    displacements: tuple[np.ndarray, np.ndarray] | None = None,
    path=None,
) -> CoordField:
    """Build a coordinate field.

    kind "rotation": rotate the default grid by ``angle`` (radians).
    kind "elastic":  default grid plus ``displacements = (row_shift, col_shift)``.
    kind "custom":   load the field verbatim from ``path``.
    """
    if kind == "rotation":
        if resolution is None:
            raise ValueError("rotation needs a resolution")
        return rotation_field(angle, *resolution)
    if kind == "elastic":
        if displacements is None:
            raise ValueError("elastic needs displacement arrays")
        return elastic_field(*displacements)
    if kind == "custom":
        if path is None:
            raise ValueError("custom needs a file path")
        from . import persistence

        return persistence.read_coord_field(path)
    raise ValueError(f"unknown coordinate field kind {kind!r}")
