"""Fit an image into the factored row/column representation by gradient
descent with hand-derived gradients, plus the truncated-SVD optimum that
bounds it.

Per channel the objective is ``L = mean_ij (F_ij - I_ij)^2`` with
``F = row_emb @ col_emb.T`` contracted over the thickness axis.  Because that
is exactly a rank-``thickness`` factorization, the best achievable loss is
the truncated-SVD residual, which ``svd_oracle_mse`` computes with a
self-contained one-sided Jacobi routine (no library decompositions in the
product path; tests cross-check it against independent solvers).

Everything here runs in 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biline import BilineFeature, compose, storage_ratio
from .errors import NumericError

OPTIMIZERS = ("adam", "gd")


@dataclass
class FitConfig:
    thickness: int = 8
    iterations: int = 5000
    learning_rate: float = 1e-2
    optimizer: str = "adam"
    seed: int = 0
    init_scale: float | None = None  # default thickness**-0.25, unit-variance start
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.thickness < 1:
            raise ValueError(f"thickness must be >= 1, got {self.thickness}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")

    @property
    def resolved_init_scale(self) -> float:
        return self.thickness**-0.25 if self.init_scale is None else self.init_scale


@dataclass
class FitResult:
    embeddings: BilineFeature
    mse_trace: np.ndarray
    final_mse: float
    compression_ratio: float


def loss_gradients(row_emb: np.ndarray, col_emb: np.ndarray, image: np.ndarray):
    """Loss and analytic gradients for the per-channel objective.

    Shapes: ``row_emb`` (C, H, D), ``col_emb`` (C, W, D), ``image`` (C, H, W).
    Each channel keeps its own mean-squared loss; gradients are
    ``d/d row = (2 / (H*W)) * resid @ col`` and symmetrically for the column
    half.  Returns (mean loss over all channels, grad_row, grad_col).
    """
    height, width = image.shape[1], image.shape[2]
    resid = row_emb @ col_emb.transpose(0, 2, 1) - image
    coeff = 2.0 / (height * width)
    grad_row = coeff * (resid @ col_emb)
    grad_col = coeff * (resid.transpose(0, 2, 1) @ row_emb)
    return float(np.mean(resid * resid)), grad_row, grad_col


def fit_biline(image: np.ndarray, config: FitConfig) -> FitResult:
    """Optimize factored embeddings to reproduce ``image`` (C, H, W).

    Channels are optimized independently (their losses and gradients never
    mix); the vectorized loop below is arithmetic-identical to running one
    channel at a time.  The trace records the loss before each update.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.size == 0:
        raise ValueError(f"image must be a non-empty (C, H, W) array, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image must be finite")
    channels, height, width = image.shape

    rng = np.random.default_rng(config.seed)
    scale = config.resolved_init_scale
    row_emb = rng.normal(0.0, scale, (channels, height, config.thickness))
    col_emb = rng.normal(0.0, scale, (channels, width, config.thickness))

    adam = config.optimizer == "adam"
    if adam:
        state = [np.zeros_like(p) for p in (row_emb, col_emb, row_emb, col_emb)]

    trace = np.empty(config.iterations, dtype=np.float64)
    # Divergence shows up as overflow before the finite-check fires; report it
    # through NumericError instead of floating-point warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        return _fit_loop(image, config, row_emb, col_emb, state if adam else None, trace)


def _fit_loop(image, config, row_emb, col_emb, adam_state, trace):
    adam = adam_state is not None
    for t in range(1, config.iterations + 1):
        mse, grad_row, grad_col = loss_gradients(row_emb, col_emb, image)
        if not np.isfinite(mse):
            raise NumericError(
                f"fit diverged: non-finite loss at iteration {t} "
                f"(thickness={config.thickness}, lr={config.learning_rate})"
            )
        trace[t - 1] = mse
        if adam:
            c1 = 1.0 - config.beta1**t
            c2 = 1.0 - config.beta2**t
            for k, (param, grad) in enumerate(((row_emb, grad_row), (col_emb, grad_col))):
                m, v = adam_state[k], adam_state[k + 2]
                m *= config.beta1
                m += (1.0 - config.beta1) * grad
                v *= config.beta2
                v += (1.0 - config.beta2) * grad * grad
                param -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
        else:
            row_emb -= config.learning_rate * grad_row
            col_emb -= config.learning_rate * grad_col

    embeddings = BilineFeature(row_emb, col_emb)
    final = float(np.mean((compose(embeddings) - image) ** 2))
    return FitResult(
        embeddings=embeddings,
        mse_trace=trace,
        final_mse=final,
        compression_ratio=storage_ratio(embeddings),
    )


def singular_values(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Singular values by one-sided Jacobi rotations, descending.

    Columns of a working copy are rotated pairwise until mutually orthogonal;
    their norms are then the singular values.  Self-contained on purpose: it
    is the independent optimum against which the gradient-descent fit is
    judged, so it must not share code with the fit path.
    """
    work = np.array(matrix, dtype=np.float64, copy=True)
    if work.ndim != 2 or work.size == 0:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {work.shape}")
    if work.shape[0] < work.shape[1]:
        work = work.T.copy()
    n = work.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                col_p = work[:, p]
                col_q = work[:, q]
                app = col_p @ col_p
                aqq = col_q @ col_q
                apq = col_p @ col_q
                if apq == 0.0 or abs(apq) <= tol * np.sqrt(app * aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                # sign(0) must rotate by 45 degrees or equal-norm parallel
                # columns (rank-deficient inputs) never separate
                sign = 1.0 if tau >= 0.0 else -1.0
                t = sign / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                work[:, p] = new_p
                work[:, q] = new_q
        if not rotated:
            break
    sv = np.sqrt(np.sum(work * work, axis=0))
    sv[::-1].sort()
    return sv


def svd_oracle_mse(channel: np.ndarray, rank: int) -> float:
    """Global optimum of the fit objective: best rank-``rank`` residual MSE.

    ``mean of the squared singular values beyond the first `rank```, i.e.
    ``(||A||_F^2 - sum_{k<=rank} sv_k^2) / (H*W)``.
    """
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise ValueError(f"channel must be 2-D, got shape {channel.shape}")
    if not 1 <= rank <= min(channel.shape):
        raise ValueError(f"rank must be in [1, {min(channel.shape)}], got {rank}")
    sv = singular_values(channel)
    total = float(np.sum(channel * channel))
    kept = float(np.sum(sv[:rank] ** 2))
    return max(total - kept, 0.0) / channel.size


def gradient_check(
    image: np.ndarray,
    thickness: int,
    *,
    seed: int = 0,
    step: float = 1e-5,
    row_emb: np.ndarray | None = None,
    col_emb: np.ndarray | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Evaluated at a random N(0, 1) point (or an explicit one) on a small
    single-channel image; the error metric is
    ``|g_a - g_fd| / max(1, |g_a|, |g_fd|)`` over all parameters.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"gradient_check expects a single (H, W) channel, got {image.shape}")
    height, width = image.shape
    if height > 8 or width > 8:
        raise ValueError("gradient_check is a reference oracle; keep the image at most 8x8")
    rng = np.random.default_rng(seed)
    if row_emb is None:
        row_emb = rng.normal(size=(height, thickness))
    if col_emb is None:
        col_emb = rng.normal(size=(width, thickness))
    row_emb = np.asarray(row_emb, dtype=np.float64)[None]
    col_emb = np.asarray(col_emb, dtype=np.float64)[None]
    target = image[None]

    _, grad_row, grad_col = loss_gradients(row_emb, col_emb, target)

    def loss_at(r, c):
        resid = r @ c.transpose(0, 2, 1) - target
        return float(np.mean(resid * resid))

    worst = 0.0
    for param, grad in ((row_emb, grad_row), (col_emb, grad_col)):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + step
            up = loss_at(row_emb, col_emb)
            flat[k] = keep - step
            down = loss_at(row_emb, col_emb)
            flat[k] = keep
            fd = (up - down) / (2.0 * step)
            denom = max(1.0, abs(gflat[k]), abs(fd))
            worst = max(worst, abs(gflat[k] - fd) / denom)
    return worst
