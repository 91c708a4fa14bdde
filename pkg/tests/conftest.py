"""Test configuration and fixtures."""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from elasticity_imaging.config import ExperimentConfig, from_dict
from elasticity_imaging.fem_core import PsiTensor, assemble_psi
from elasticity_imaging.mesh import Mesh, generate_mesh
from elasticity_imaging.synth import (
    Loading,
    Phantom,
    forward_solve,
    make_phantom,
    uniform_compression,
)

TINY_CONFIG = {
    "mesh": {"target_nodes": 36, "jitter": 0.2, "seed": 3},
    "phantom": {"center": [0.5, 0.5], "radius": 0.3},
    "noise": {"seeds": [0]},
    "solver": {"outer_iters": 2, "inner_iters": 5, "tv_inner_iters": 20},
    "sweep": {"values": [0.01, 0.05], "workers": 2},
    "output": {"resolution": 32},
}


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def small_mesh() -> Mesh:
    """An 8×8 jittered mesh of the unit square."""
    return generate_mesh(target_nodes=64, jitter=0.2, seed=1)


@pytest.fixture
def loading(small_mesh) -> Loading:
    return uniform_compression(small_mesh, traction=100.0)


@pytest.fixture
def psi(small_mesh, loading) -> PsiTensor:
    return assemble_psi(small_mesh, 0.45, loading.dirichlet)


@pytest.fixture
def phantom(small_mesh) -> Phantom:
    return make_phantom(
        small_mesh, background=10e3, inclusion_modulus=50e3, center=(0.5, 0.5), radius=0.3
    )


@pytest.fixture
def forward(psi, phantom, loading):
    """(u, f_true) for the phantom under uniform compression."""
    return forward_solve(psi, phantom.E_true, loading)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(temp_dir) -> ExperimentConfig:
    """A fast experiment writing into the temporary directory."""
    data = {section: dict(values) for section, values in TINY_CONFIG.items()}
    data["output"]["directory"] = str(temp_dir / "out")
    return from_dict(data)
