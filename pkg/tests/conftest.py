"""Shared test fixtures for rc-treatment-effects."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the source directory is importable without installing the package.
SRC_PATH = Path(__file__).resolve().parent.parent / "src"
if str(SRC_PATH) not in sys.path:
    sys.path.insert(0, str(SRC_PATH))

from rc_treatment_effects.config import BOX_3, DgpSpec, EstimatorConfig  # noqa: E402
from rc_treatment_effects.dgp import generate  # noqa: E402
from rc_treatment_effects.estimation.base import Sample  # noqa: E402


def fast_config(**overrides) -> EstimatorConfig:
    """Coarser quadrature and grid than the defaults; enough for statistical checks."""
    params = dict(T=6.0, n_phi=61, n_u=121, grid_res=(25, 25), box=BOX_3)
    params.update(overrides)
    return EstimatorConfig(**params)


@pytest.fixture(scope="session")
def small_sample() -> Sample:
    return generate(DgpSpec(variant="baseline", n=1500, seed=11))


@pytest.fixture(scope="session")
def baseline_sample() -> Sample:
    return generate(DgpSpec(variant="baseline", n=10000, seed=7))


@pytest.fixture(scope="session")
def independent_sample() -> Sample:
    return generate(DgpSpec(variant="independent", n=20000, seed=3))


@pytest.fixture(scope="session")
def constant_delta_sample() -> Sample:
    return generate(DgpSpec(variant="constant_delta", n=10000, seed=5))


@pytest.fixture(scope="session")
def scalar_sample() -> Sample:
    return generate(DgpSpec(variant="scalar_L1", n=10000, seed=9))


@pytest.fixture
def uniform_design():
    """Treated sample on a uniform (angle, v) design, for regression checks."""
    rng = np.random.default_rng(2024)
    n = 2000
    phi = rng.uniform(0.5, 2.6, n)
    v = rng.uniform(-3.0, 3.0, n)
    return phi, v, rng


@pytest.fixture(scope="session")
def fast_cfg() -> EstimatorConfig:
    return fast_config()
