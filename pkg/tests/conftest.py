import numpy as np
import pytest
from hypothesis import settings

from latentgraph.model import ModelParams, ScoreBundle

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_instance(rng, p=4, k=2, k_m=(3, 3), n=10, b_scale=0.3):
    """Random scores and parameters of the given shape."""
    data = ScoreBundle(p, tuple(rng.standard_normal((p * km, n)) for km in k_m))
    a = tuple(rng.standard_normal((k, km)) for km in k_m)
    b = b_scale * rng.standard_normal((p, k, k * (p - 1)))
    return data, ModelParams(a, b)


def random_spd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.geomspace(1.0, cond, d)
    return (q * eig) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
