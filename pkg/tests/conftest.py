import os
import sys

import numpy as np
import pytest

os.environ.setdefault("MPLBACKEND", "Agg")
sys.path.insert(0, os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

from src.constraints.constraint_set import ConstraintSet  # noqa: E402
from src.constraints.functionals import FunctionalSamples  # noqa: E402
from src.constraints.presets import mean_constraint  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def normal_samples(rng):
    """10⁵ standard-normal terminal values."""
    return rng.standard_normal(100_000)


@pytest.fixture
def mean_samples(normal_samples):
    """Single mean constraint on standard-normal samples, target 0.3."""
    return FunctionalSamples(normal_samples[:, None], [0.3], ("mean",))


@pytest.fixture
def mean_set():
    return ConstraintSet((mean_constraint(0.0),))
