"""Test configuration."""

from pathlib import Path

import numpy as np
import pytest

from rangecore.models.projection import GridSpec
from rangecore.models.voxels import VoxelSpec


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(0)


@pytest.fixture()
def grid() -> GridSpec:
    """Default range image grid."""
    return GridSpec()


@pytest.fixture()
def voxel_spec() -> VoxelSpec:
    """Default voxel grid."""
    return VoxelSpec()


@pytest.fixture()
def small_grid() -> GridSpec:
    """Full-circle grid of two rows and four columns."""
    return GridSpec(az_step=90.0, el_min=-10.0, el_max=10.0, el_step=10.0)


@pytest.fixture()
def project_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Working directory without a parameters file."""
    monkeypatch.chdir(tmp_path)
    return tmp_path
