import warnings

import numpy as np
import pytest
from hypothesis import settings

from besselharm import LambdaSpace, LogGrid

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_tail_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        yield


@pytest.fixture
def space1():
    return LambdaSpace(1.0)


@pytest.fixture
def small_grid():
    return LogGrid(1e-2, 1e2, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
