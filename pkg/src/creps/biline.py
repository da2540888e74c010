"""Thick bi-line features: factored per-row / per-column embeddings and their
composition into dense maps.

A bi-line feature stores, per channel, a (height x thickness) row embedding
and a (width x thickness) column embedding.  Composition takes, per pixel,
the dot product of the matching row and column slices over the thickness
axis, which makes the composed channel a rank-``thickness`` matrix at a
storage cost of ``thickness * (H + W)`` instead of ``H * W`` elements.

The thickness sum always runs in ascending slot order, one outer product at a
time, so composing any index subset is bit-identical to restricting the full
composition.  Tiled rendering relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BilineFeature:
    """Factored feature: ``row_half`` (C, H, D) and ``col_half`` (C, W, D)."""

    row_half: np.ndarray
    col_half: np.ndarray

    def __post_init__(self):
        self.row_half = np.asarray(self.row_half)
        self.col_half = np.asarray(self.col_half)
        if self.row_half.ndim != 3 or self.col_half.ndim != 3:
            raise ValueError("both halves must be (channels, length, thickness) arrays")
        if self.row_half.shape[0] != self.col_half.shape[0]:
            raise ValueError(
                f"channel mismatch: {self.row_half.shape[0]} vs {self.col_half.shape[0]}"
            )
        if self.row_half.shape[2] != self.col_half.shape[2]:
            raise ValueError(
                f"thickness mismatch: {self.row_half.shape[2]} vs {self.col_half.shape[2]}"
            )
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1")
        if not (np.all(np.isfinite(self.row_half)) and np.all(np.isfinite(self.col_half))):
            raise ValueError("bi-line entries must be finite")

    @property
    def channels(self) -> int:
        return self.row_half.shape[0]

    @property
    def height(self) -> int:
        return self.row_half.shape[1]

    @property
    def width(self) -> int:
        return self.col_half.shape[1]

    @property
    def thickness(self) -> int:
        return self.row_half.shape[2]

    def stacked(self) -> np.ndarray:
        """Square-only combined view (C, H, 2*D), row slots first.

        Height and width must match; the separate halves remain the canonical
        storage so non-square features stay representable.
        """
        if self.height != self.width:
            raise ValueError("stacked view requires height == width")
        return np.concatenate([self.row_half, self.col_half], axis=2)


def _compose_halves(row_half: np.ndarray, col_half: np.ndarray) -> np.ndarray:
    out_dtype = np.result_type(row_half.dtype, col_half.dtype)
    channels, height, _ = row_half.shape
    width = col_half.shape[1]
    out = np.zeros((channels, height, width), dtype=out_dtype)
    for d in range(row_half.shape[2]):
        out += row_half[:, :, d, None] * col_half[:, None, :, d]
    return out


def compose(b: BilineFeature) -> np.ndarray:
    """Dense (C, H, W) map: ``out[c, i, j] = sum_d row[c, i, d] * col[c, j, d]``.

    The sum over ``d`` is accumulated in ascending order for every output
    element, independent of array shapes or parallel decomposition.
    """
    return _compose_halves(b.row_half, b.col_half)


def _check_index(i: int, bound: int, what: str) -> int:
    i = int(i)
    if not 0 <= i < bound:
        raise IndexError(f"{what} index {i} out of range [0, {bound})")
    return i


def compose_pixel(b: BilineFeature, i: int, j: int) -> np.ndarray:
    """Channel vector at pixel (i, j); bitwise equal to ``compose(b)[:, i, j]``."""
    i = _check_index(i, b.height, "row")
    j = _check_index(j, b.width, "column")
    out = np.zeros(b.channels, dtype=np.result_type(b.row_half.dtype, b.col_half.dtype))
    for d in range(b.thickness):
        out += b.row_half[:, i, d] * b.col_half[:, j, d]
    return out


def compose_subset(b: BilineFeature, row_idx, col_idx) -> np.ndarray:
    """Compose only the requested rows and columns (duplicates allowed).

    Exact restriction: ``out[c, a, b] == compose(b)[c, row_idx[a], col_idx[b]]``
    bit-for-bit, because per-pixel arithmetic never depends on the subset.
    """
    row_idx = [_check_index(i, b.height, "row") for i in np.atleast_1d(row_idx)]
    col_idx = [_check_index(j, b.width, "column") for j in np.atleast_1d(col_idx)]
    return _compose_halves(b.row_half[:, row_idx, :], b.col_half[:, col_idx, :])


def storage_ratio(b: BilineFeature, height: int | None = None, width: int | None = None) -> float:
    """Element-count ratio of both embeddings to the dense map they replace.

    ``thickness * (H + W) / (H * W)``.  This counts the row and the column
    embedding together; a single embedding alone is half of it.
    """
    height = b.height if height is None else int(height)
    width = b.width if width is None else int(width)
    return b.thickness * (height + width) / (height * width)
