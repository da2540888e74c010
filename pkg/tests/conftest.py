import os

# Must run before numpy is imported anywhere in the session: reductions in
# the few BLAS-backed calls must not depend on ambient thread pools.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from creps.generator import GeneratorConfig, init_weights


@pytest.fixture(scope="session")
def small_config():
    """Compact generator for fast structural tests; exercises every code path."""
    return GeneratorConfig(
        latent_dim=16,
        style_dim=16,
        mapping_layers=2,
        num_blocks=3,
        hidden_channels=32,
        fourier_channels=8,
        thickness=4,
    )


@pytest.fixture(scope="session")
def small_weights(small_config):
    return init_weights(small_config, seed=0)


@pytest.fixture(scope="session")
def small_latent(small_config):
    return np.random.default_rng(7).normal(size=small_config.latent_dim).astype(np.float32)
