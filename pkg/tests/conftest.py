"""
Shared fixtures: the unit disk and coarse admissible meshes on it.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unfitted_hdg.geometry.boundary import circle  # noqa: E402
from unfitted_hdg.hdg.discretization import HDGDiscretization  # noqa: E402
from unfitted_hdg.mesh.generator import build_admissible_mesh  # noqa: E402
from unfitted_hdg.mesh.transfer import build_transfer_data  # noqa: E402

COARSE_H = 0.3


@pytest.fixture(scope="session")
def unit_circle():
    return circle()


@pytest.fixture(scope="session")
def disk_mesh(unit_circle):
    return build_admissible_mesh(unit_circle, COARSE_H)


@pytest.fixture(scope="session")
def disk_transfer(disk_mesh, unit_circle):
    """Transfer data at the order used for k = 1."""
    return build_transfer_data(disk_mesh, unit_circle, 4)


@pytest.fixture(scope="session")
def make_disc(disk_mesh, unit_circle):
    """Factory for discretizations of the coarse disk mesh at degree k."""
    cache = {}

    def build(k, tau=1.0, tau_boundary=None):
        key = (k, tau, tau_boundary)
        if key not in cache:
            transfer = build_transfer_data(disk_mesh, unit_circle, 2 * k + 2)
            cache[key] = HDGDiscretization(disk_mesh, transfer, k, tau, tau_boundary)
        return cache[key]

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
