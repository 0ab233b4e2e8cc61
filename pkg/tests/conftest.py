import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from privdesign.prob import make_instance

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
PROFILE = os.environ.get("PRIVDESIGN_HYPOTHESIS", "default")
settings.load_profile(PROFILE)


def capped(n: int) -> settings:
    """Example cap for slow property tests; the thorough profile lifts it."""
    return settings(max_examples=1000 if PROFILE == "thorough" else n)

HYBRID_P = [[0.3, 0.8, 0.5, 0.4], [0.7, 0.2, 0.5, 0.6]]
HYBRID_PY = [0.5, 0.25, 0.125, 0.125]
HYBRID_EPS = [0.01, 0.01, 0.01, 0.0]


def symmetric_channel(delta: float) -> np.ndarray:
    return np.array([[1 - delta, delta], [delta, 1 - delta]])


def random_stochastic(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.dirichlet(np.ones(rows), size=cols).T


def random_invertible(rng: np.random.Generator, n: int, dominance: float = 2.0) -> np.ndarray:
    """Diagonally heavy column-stochastic matrix (well conditioned)."""
    m = rng.uniform(0.0, 1.0, size=(n, n)) + dominance * n * np.eye(n)
    return m / m.sum(axis=0)


def random_full_row_rank(rng: np.random.Generator, nx: int, ny: int) -> np.ndarray:
    while True:
        p = random_stochastic(rng, nx, ny)
        if np.linalg.matrix_rank(p) == nx:
            return p


@pytest.fixture
def hybrid():
    return make_instance(HYBRID_P, HYBRID_PY, HYBRID_EPS, "l1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
