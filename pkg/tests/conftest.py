"""Shared fixtures: small meshes and operator sets reused across tests."""

import numpy as np
import pytest

from stagdg import mesh as msh
from stagdg.basis import SpaceTimeBasis
from stagdg.operators import Operators

ALL_WALL = {s: "transmissive" for s in ("left", "right", "bottom", "top")}
ALL_PERIODIC = {"left": "periodic:x", "right": "periodic:x",
                "bottom": "periodic:y", "top": "periodic:y"}


def small_mesh(bc=None, nx=4, ny=4, jitter=0.0, seed=0, lx=1.0, ly=1.0):
    pm, tags = msh.generate_rectangle(
        0.0, lx, 0.0, ly, nx, ny, bc or ALL_WALL, jitter=jitter, seed=seed)
    return msh.build_staggered(pm, tags)


def two_triangle_mesh(bc=None):
    """Unit square split along the diagonal; one interior edge."""
    pm, tags = msh.generate_rectangle(0.0, 1.0, 0.0, 1.0, 1, 1, bc or ALL_WALL)
    return msh.build_staggered(pm, tags)


@pytest.fixture(scope="session")
def periodic_ops():
    return Operators(small_mesh(ALL_PERIODIC, jitter=0.1, seed=1),
                     SpaceTimeBasis(2, 1))


@pytest.fixture(scope="session")
def wall_ops():
    return Operators(small_mesh(ALL_WALL, jitter=0.1, seed=2),
                     SpaceTimeBasis(2, 1))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
