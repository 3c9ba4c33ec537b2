import numpy as np
import pytest

from ontic.ontology import Integrator


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fast():
    """A cheap integrator for unit tests."""
    return Integrator(samples=40_000, seed=3)
