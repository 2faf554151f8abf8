"""Voxel grid and the optional per-point affine map."""

from math import ceil

import numpy as np
from pydantic.v1 import BaseModel, Field, validator

from rangecore.models.projection import count_steps, is_multiple
from rangecore.types import Floats, VoxelMode

SCENE_XY = 51.2
"""Half extent of the scene in x and y (m)."""
SCENE_Z = (-3.0, 3.0)
"""Vertical extent of the scene (m)."""
VOXEL_DZ = 0.15
"""Vertical voxel size (m). Gives whole layer counts at every studied resolution."""
BOUND_FIELDS = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "dx", "dy"}
"""Fields that must validate before the extents can be checked."""


class VoxelSpec(BaseModel):
    """Scene bounds and voxel sizes, in meters."""

    class Config:
        """Model config."""

        frozen = True

    mode: VoxelMode = Field(
        default="voxel", description="Regular voxels, or pillars with one layer."
    )

    # ! BOUNDS

    x_min: float = -SCENE_XY
    x_max: float = SCENE_XY
    y_min: float = -SCENE_XY
    y_max: float = SCENE_XY
    z_min: float = SCENE_Z[0]
    z_max: float = SCENE_Z[1]

    # ! SIZES

    dx: float = Field(default=0.1, description="Voxel size along x.")
    dy: float = Field(default=0.1, description="Voxel size along y.")
    dz: float = Field(
        default=VOXEL_DZ, description="Voxel size along z. Ignored for pillars."
    )

    @validator("dz", always=True)
    @classmethod
    def validate_dz(cls, dz, values):
        """Pillars span the whole vertical extent."""
        if values.get("mode") == "pillar":
            return values["z_max"] - values["z_min"]
        return dz

    @validator("dx", "dy", "dz", always=True)
    @classmethod
    def validate_size(cls, size):
        """Sizes must be positive."""
        if size <= 0:
            raise ValueError("Voxel sizes must be positive.")
        return size

    @validator("dz", always=True)
    @classmethod
    def validate_multiples(cls, dz, values):
        """Every extent must be a whole number of voxels."""
        if not BOUND_FIELDS <= set(values):
            return dz
        for lo, hi, size in (
            (values["x_min"], values["x_max"], values["dx"]),
            (values["y_min"], values["y_max"], values["dy"]),
            (values["z_min"], values["z_max"], dz),
        ):
            if not is_multiple(lo, hi, size):
                raise ValueError(
                    f"Extent [{lo}, {hi}) is not an integer multiple of {size}."
                )
        return dz

    @classmethod
    def for_resolution(cls, bev_res: float, mode: VoxelMode = "voxel") -> "VoxelSpec":
        """Get the default scene at a BEV resolution.

        The x and y extents widen symmetrically to the nearest whole number of voxels
        when the resolution does not divide the default scene, e.g. 0.25 m.
        """
        half = (
            SCENE_XY
            if is_multiple(-SCENE_XY, SCENE_XY, bev_res)
            else ceil(2 * SCENE_XY / bev_res) * bev_res / 2
        )
        return cls(
            mode=mode,
            x_min=-half,
            x_max=half,
            y_min=-half,
            y_max=half,
            dx=bev_res,
            dy=bev_res,
        )

    @property
    def counts(self) -> tuple[int, int, int]:
        """Voxel counts along x, y, and z."""
        return (
            count_steps(self.x_min, self.x_max, self.dx),
            count_steps(self.y_min, self.y_max, self.dy),
            count_steps(self.z_min, self.z_max, self.dz),
        )

    @property
    def lows(self) -> Floats:
        """Lower bounds."""
        return np.array([self.x_min, self.y_min, self.z_min])

    @property
    def highs(self) -> Floats:
        """Upper bounds."""
        return np.array([self.x_max, self.y_max, self.z_max])

    @property
    def sizes(self) -> Floats:
        """Voxel sizes."""
        return np.array([self.dx, self.dy, self.dz])


class AffineMap(BaseModel):
    """Affine map applied to every point feature, `W @ v + b`."""

    weight: list[list[float]] = Field(description="Matrix of shape (out, in).")
    bias: list[float] = Field(description="Offset of shape (out,).")

    @validator("bias")
    @classmethod
    def validate_bias(cls, bias, values):
        """Bias length must match the output dimension of the weight."""
        weight = values.get("weight")
        if weight is not None and len(bias) != len(weight):
            raise ValueError("Bias length does not match weight rows.")
        return bias

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        """Get the identity map."""
        return cls(weight=np.eye(dim).tolist(), bias=[0.0] * dim)

    @property
    def w(self) -> Floats:
        """Weight as an array."""
        return np.array(self.weight, dtype=np.float64).reshape(len(self.weight), -1)

    @property
    def b(self) -> Floats:
        """Bias as an array."""
        return np.array(self.bias, dtype=np.float64)
