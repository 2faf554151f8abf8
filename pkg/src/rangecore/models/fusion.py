"""Feature pooling and multi-frame fusion settings."""

from pydantic.v1 import BaseModel, Field, validator

from rangecore.types import Pool, Strategy

SEMANTIC_DIM = 64
"""Dimension of per-pixel semantic features."""


class PoolingConfig(BaseModel):
    """Pooling of point features into voxel features.

    Max pooling of the high-dimensional semantic slice together with average pooling
    of the low-dimensional geometric slice performs best. All four combinations are
    selectable.
    """

    class Config:
        """Model config."""

        frozen = True

    semantic_pool: Pool = Field(default="max", description="Semantic slice pooling.")
    geometric_pool: Pool = Field(
        default="avg", description="Geometric slice pooling."
    )


class FusionConfig(BaseModel):
    """Multi-frame fusion of range images."""

    class Config:
        """Model config."""

        frozen = True

    strategy: Strategy = Field(
        default="spatial",
        description="Stack per-frame images, or project aligned frames finer.",
    )
    n: int = Field(
        default=2,
        description="Resolution multiple of spatial fusion. Two suits ten frames.",
    )

    @validator("n")
    @classmethod
    def validate_n(cls, n):
        """Resolution multiple is a positive integer."""
        if n < 1:
            raise ValueError("Resolution multiple must be at least one.")
        return n
