import numpy as np
import pytest


def random_adjacency(rng, n, directed=True, density=0.3):
    a = (rng.random((n, n)) < density).astype(np.uint8)
    np.fill_diagonal(a, 0)
    if not directed:
        a = np.triu(a, 1)
        a = a | a.T
    return a


def random_series_array(rng, T, n, directed=True, density=0.3):
    return np.stack([random_adjacency(rng, n, directed, density) for _ in range(T)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
