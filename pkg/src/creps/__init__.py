"""Scale-equivariant coordinate-based image synthesis toolkit.

The generator maps a latent vector plus row/column coordinate vectors to an
RGB image.  Intermediate features are kept as factored per-row and per-column
embeddings ("bi-line" features) that are only composed into dense maps when
needed, which makes activation memory grow linearly instead of quadratically
with resolution.  Alongside the generator the package ships an image fitter
for the factored representation (with an exact truncated-SVD optimum as
oracle), arbitrary-scale / tiled / warped renderers, an activation-memory
bench, and bit-exact file formats for weights, coordinate fields and images.

Every reduction in the synthesis path runs in a fixed order, so outputs are
reproducible bit-for-bit across runs, tilings and thread counts.
"""

import os as _os

# Pin BLAS pools unless the caller already chose; per-element results of the
# few BLAS calls used here must not depend on ambient thread counts.
for _var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    _os.environ.setdefault(_var, "1")
del _os, _var

from .errors import (
    BadMagicError,
    ConfigError,
    DuplicateNameError,
    FormatError,
    LengthMismatchError,
    MemoryBudgetError,
    NumericError,
    TruncatedFileError,
)
from .coords import (
    CoordField,
    CoordVector,
    FourierParams,
    Transform,
    default_grid_field,
    fourier_encode,
    grid_coords,
    make_coord_field,
)
from .biline import BilineFeature, compose, compose_pixel, compose_subset, storage_ratio
from .generator import (
    GeneratorConfig,
    GeneratorWeights,
    init_weights,
    map_latent,
    modulated_linear,
    synthesis_block,
    synthesize,
    synthesize_dense,
)
from .fitter import FitConfig, FitResult, fit_biline, gradient_check, svd_oracle_mse
from .renderer import (
    RenderRequest,
    read_image,
    render,
    render_pixelwise,
    render_tiled,
    render_warped,
    to_uint8,
    write_image,
)
from .bench import ActivationRecorder, count_activations, run_bench

__version__ = "0.1.0"


def sample_image_path() -> str:
    """Filesystem path of the bundled 128x128 test photograph (PPM)."""
    from importlib.resources import files

    return str(files("creps").joinpath("data/sample_photo_128.ppm"))

__all__ = [
    "sample_image_path",
    "ActivationRecorder",
    "BadMagicError",
    "BilineFeature",
    "ConfigError",
    "CoordField",
    "CoordVector",
    "DuplicateNameError",
    "FitConfig",
    "FitResult",
    "FormatError",
    "FourierParams",
    "GeneratorConfig",
    "GeneratorWeights",
    "LengthMismatchError",
    "MemoryBudgetError",
    "NumericError",
    "RenderRequest",
    "Transform",
    "TruncatedFileError",
    "compose",
    "compose_pixel",
    "compose_subset",
    "count_activations",
    "default_grid_field",
    "fit_biline",
    "fourier_encode",
    "gradient_check",
    "grid_coords",
    "init_weights",
    "make_coord_field",
    "map_latent",
    "modulated_linear",
    "read_image",
    "render",
    "render_pixelwise",
    "render_tiled",
    "render_warped",
    "run_bench",
    "storage_ratio",
    "svd_oracle_mse",
    "synthesis_block",
    "synthesize",
    "synthesize_dense",
    "to_uint8",
    "write_image",
]
