import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from boltzlab import (CounterexampleParams, GaussianDensity,
                      build_counterexample)
from boltzlab.operator import make_quadrature, quadrature_for_profile


@pytest.fixture(scope="session")
def prof100():
    """Sharp ring/spike density at a = 100 with the selected c = 1."""
    return build_counterexample(
        CounterexampleParams(a=100.0, c=1.0, floor_delta=1e-6))


@pytest.fixture(scope="session")
def quad100(prof100):
    return quadrature_for_profile(prof100, n_sigma=8192)


@pytest.fixture(scope="session")
def gauss():
    return GaussianDensity()


@pytest.fixture(scope="session")
def quad_gauss():
    return make_quadrature(8.0, fine_spacing=0.02, coarse_spacing=0.02,
                           n_sigma=4096)


def random_positive_profile(rng: np.random.Generator):
    """Strictly positive step profile with a few random annuli."""
    from boltzlab import RadialStepProfile
    n = int(rng.integers(2, 6))
    breaks = np.sort(rng.uniform(0.4, 7.5, size=n))
    breaks = np.append(breaks, 8.0)
    keep = np.concatenate(([True], np.diff(breaks) > 0.05))
    breaks = breaks[keep]
    floor = float(rng.uniform(1e-3, 0.3))
    vals = rng.uniform(0.1, 5.0, size=breaks.size)
    vals = np.maximum(vals, floor)
    return RadialStepProfile(breakpoints=breaks, values=vals,
                             floor_delta=floor)
