import numpy as np
import pytest

from backlashcert import Ball, PeriodicInput, PlantModel

TWO_PI = 2.0 * np.pi


def desk_model(e=-0.15):
    return PlantModel([[0.0, 1.0], [-2.0, -3.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0], [e]])


@pytest.fixture
def desk():
    return desk_model(), Ball([0.0], 0.2), PeriodicInput.sine(10.0, TWO_PI)


@pytest.fixture
def desk_small():
    return desk_model(), Ball([0.0], 0.2), PeriodicInput.sine(0.3, TWO_PI)


def random_hurwitz(rng, n, margin=0.2):
    M = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(M).real) + margin + rng.uniform(0.0, 1.0)
    return M - shift * np.eye(n)
