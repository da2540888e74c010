"""Order-fixed dense linear primitives.

Everything in the synthesis path that reduces over an axis must produce the
same bits no matter how the non-reduced axes are split (tiles, single pixels,
thread counts).  numpy's dot/matmul do not promise that across shapes, so the
channel contraction here is an explicit ascending-index loop of elementwise
multiply-adds: the value at output column ``l`` depends only on input column
``l`` and the matrix, never on which other columns are present.
"""

from __future__ import annotations

import math

import numpy as np

# Column block for the contraction loop; keeps the output slab cache-resident.
_BLOCK = 4096

# Variance-preserving gain applied after leaky activations, as is conventional
# for this generator family; without it deep zero-bias stacks decay to zero.
ACT_GAIN = math.sqrt(2.0)


def ordered_matmul(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``matrix @ x`` with a fixed ascending accumulation order.

    ``matrix`` is (out, in), ``x`` is (in, n).  For every output element the
    sum over the input axis is accumulated in ascending input index, one
    elementwise multiply-add at a time, so restricting ``x`` to any column
    subset restricts the result bit-for-bit.
    """
    out_dim, in_dim = matrix.shape
    if x.shape[0] != in_dim:
        raise ValueError(f"matrix expects {in_dim} input channels, got {x.shape[0]}")
    n = x.shape[1]
    out = np.zeros((out_dim, n), dtype=x.dtype)
    tmp = np.empty((out_dim, min(_BLOCK, n)), dtype=x.dtype)
    cols = [np.ascontiguousarray(matrix[:, i, None], dtype=x.dtype) for i in range(in_dim)]
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        seg = out[:, lo:hi]
        t = tmp[:, : hi - lo]
        for i in range(in_dim):
            np.multiply(cols[i], x[i, lo:hi], out=t)
            np.add(seg, t, out=seg)
    return out


def leaky_relu(x: np.ndarray, slope: float = 0.2, gain: float = ACT_GAIN) -> np.ndarray:
    """Leaky rectifier with output gain; elementwise, dtype-preserving."""
    return np.where(x >= 0, x, x * np.asarray(slope, dtype=x.dtype)) * np.asarray(
        gain, dtype=x.dtype
    )


def equalized(weight: np.ndarray) -> np.ndarray:
    """Scale a raw (out, in) weight by 1/sqrt(fan_in) at use time."""
    return weight * np.asarray(1.0 / math.sqrt(weight.shape[1]), dtype=weight.dtype)
