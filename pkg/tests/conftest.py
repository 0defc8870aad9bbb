"""Shared test configuration.

The acceptance module runs minute-scale simulations; everything else is fast.
Randomized suites draw from fixed-seed generators so failures replay exactly.
"""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


def random_lindblad(rng, dim, n_channels=2, kick=False):
    """A generic dense model: random Hermitian H, random bounded channels."""
    from qjlab.models import LindbladModel

    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (a + a.conj().T) / 2
    ls = [
        (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(dim)
        for _ in range(n_channels)
    ]
    if not kick:
        return LindbladModel(h, tuple(ls))
    b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return LindbladModel(h, tuple(ls), kick_generator=(b + b.conj().T) / 2, kick_period=1.0)
