"""Tests for parameter models."""

from pathlib import Path

import pytest
from pydantic.v1 import ValidationError

from rangecore.exceptions import ResolutionMultipleError
from rangecore.models.fusion import FusionConfig
from rangecore.models.params import Params
from rangecore.models.projection import GridSpec
from rangecore.models.voxels import VoxelSpec

PARAMS_TEXT = (Path(__file__).parents[2] / "params.yaml").read_text(encoding="utf-8")
"""Checked-in parameters."""


def test_defaults(project_dir):
    """Defaults apply without a parameters file, and nothing is written."""
    params = Params()
    assert params.grid == GridSpec()
    assert params.semantic_dim == 64
    assert params.voxels.counts == (1024, 1024, 40)
    assert (params.fusion.strategy, params.fusion.n) == ("spatial", 2)
    assert (params.pooling.semantic_pool, params.pooling.geometric_pool) == (
        "max",
        "avg",
    )
    assert (params.nms.iou_threshold, params.nms.max_output) == (0.2, 100)
    assert params.affine is None
    assert not list(project_dir.iterdir())


def test_checked_in_params_are_defaults(tmp_path):
    """The parameters file spells out the defaults."""
    (path := tmp_path / "params.yaml").write_text(PARAMS_TEXT, encoding="utf-8")
    assert Params(path) == Params(tmp_path / "missing.yaml")


def test_schema_written(tmp_path):
    """A schema is written next to the parameters file."""
    (path := tmp_path / "params.yaml").write_text(PARAMS_TEXT, encoding="utf-8")
    Params(path)
    schema = (tmp_path / "params_schema.json").read_text(encoding="utf-8")
    assert '"semantic_dim"' in schema


def test_overrides(tmp_path):
    """Values in the file override defaults."""
    (path := tmp_path / "params.yaml").write_text(
        "grid:\n  el_step: 2.5\nnms:\n  iou_threshold: 0.5\nsemantic_dim: 16\n",
        encoding="utf-8",
    )
    params = Params(path)
    assert params.grid.shape == (16, 1152)
    assert params.nms.iou_threshold == 0.5
    assert params.nms.max_output == 100
    assert params.semantic_dim == 16


def test_invalid_file(tmp_path):
    """Invalid values are rejected."""
    (path := tmp_path / "params.yaml").write_text(
        "voxels:\n  dx: 0.3\n", encoding="utf-8"
    )
    with pytest.raises(ValidationError):
        Params(path)


def test_dump_round_trip(tmp_path):
    """Dumped parameters load back equal."""
    params = Params(tmp_path / "missing.yaml", semantic_dim=32)
    params.dump(path := tmp_path / "params.yaml")
    assert Params(path) == params


@pytest.mark.parametrize(
    ("n", "shape"),
    [pytest.param(1, (32, 1152), id="1"), pytest.param(4, (128, 4608), id="4")],
)
def test_scaled_grid(n, shape):
    """Refinement divides both steps."""
    scaled = GridSpec().scaled(n)
    assert scaled.shape == shape
    assert scaled.az_step == 0.3125 / n


def test_scaled_grid_multiple():
    """Resolution multiples are positive."""
    with pytest.raises(ResolutionMultipleError, match="at least one"):
        GridSpec().scaled(0)
    with pytest.raises(ValidationError):
        FusionConfig(n=0)


def test_voxel_spec_round_trip():
    """Voxel specs rebuild from their fields."""
    spec = VoxelSpec.for_resolution(0.25, "pillar")
    assert VoxelSpec(**spec.dict()) == spec
