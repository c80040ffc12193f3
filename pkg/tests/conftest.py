import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_f32(rng, shape, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, size=shape).astype(np.float32)
