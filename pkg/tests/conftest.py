import numpy as np
import pytest

import anchored_gda as ag


@pytest.fixture(scope="session")
def bilinear2d():
    return ag.bilinear_2d()


@pytest.fixture(scope="session")
def quad10d():
    return ag.quadratic_saddle_10d()


@pytest.fixture(scope="session")
def sched_new(bilinear2d):
    return ag.parse_schedule("anchored-new:gamma=2", bilinear2d.lipschitz_K)


@pytest.fixture(scope="session")
def dense_trace(bilinear2d, sched_new):
    """Stride-1 trace for the one-step inequality checks."""
    return ag.run(bilinear2d, sched_new, np.ones(2), 1000, record_every=1)


@pytest.fixture(scope="session")
def long_trace(bilinear2d, sched_new):
    """The main T=1e5 anchored-new run on the bilinear game."""
    return ag.run(bilinear2d, sched_new, np.ones(2), 100_000, record_every=100)
