"""Project parameters."""

from pathlib import Path

from pydantic.v1 import Field

from rangecore import get_params_file
from rangecore.models import YamlModel
from rangecore.models.augment import AugmentConfig
from rangecore.models.fusion import SEMANTIC_DIM, FusionConfig, PoolingConfig
from rangecore.models.postprocess import NmsConfig
from rangecore.models.projection import GridSpec
from rangecore.models.voxels import AffineMap, VoxelSpec

PARAMS_FILE = get_params_file()


class Params(YamlModel):
    """Global project parameters."""

    grid: GridSpec = Field(default_factory=GridSpec, description="Range image grid.")
    semantic_dim: int = Field(
        default=SEMANTIC_DIM, description="Dimension of semantic features."
    )
    voxels: VoxelSpec = Field(default_factory=VoxelSpec, description="Voxel grid.")
    affine: AffineMap | None = Field(
        default=None, description="Optional affine map applied to point features."
    )
    pooling: PoolingConfig = Field(
        default_factory=PoolingConfig, description="Voxel feature pooling."
    )
    fusion: FusionConfig = Field(
        default_factory=FusionConfig, description="Multi-frame fusion."
    )
    augment: AugmentConfig = Field(
        default_factory=AugmentConfig, description="Data augmentation."
    )
    nms: NmsConfig = Field(default_factory=NmsConfig, description="Post-processing.")

    def __init__(self, data_file: Path = PARAMS_FILE, **kwargs):
        super().__init__(data_file, **kwargs)
