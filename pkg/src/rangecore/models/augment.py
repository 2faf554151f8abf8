"""Ground truth sampling and global augmentation settings."""

from math import pi

from pydantic.v1 import BaseModel, Field, validator


class AugmentConfig(BaseModel):
    """Augmentation ranges. Angles in radians, lengths in meters."""

    class Config:
        """Model config."""

        frozen = True

    # ! PASTING

    paste_rotation_max: float = Field(
        default=pi / 4,
        description="Largest rotation of a pasted sample about the sensor center.",
    )
    paste_count: int = Field(
        default=10, description="Most samples drawn from the database per frame."
    )
    z_offset: float = Field(
        default=0.0, description="Constant vertical shift applied to pasted samples."
    )

    # ! GLOBAL

    global_translation: float = Field(
        default=0.2, description="Half-width of the x and y translation range."
    )
    global_rotation: float = Field(
        default=pi / 4, description="Half-width of the rotation range about z."
    )
    global_scale: tuple[float, float] = Field(
        default=(0.95, 1.05), description="Range of the isotropic scale factor."
    )

    # ! VISIBILITY

    min_projected_points: int = Field(
        default=3,
        description="Boxes with fewer points surviving range projection are removed.",
    )

    rng_seed: int = Field(default=0, description="Seed of the augmentation generator.")

    @validator(
        "paste_rotation_max", "global_translation", "global_rotation", "paste_count"
    )
    @classmethod
    def validate_half_width(cls, value):
        """Symmetric ranges have non-negative half-widths."""
        if value < 0:
            raise ValueError("Half-widths and counts must be non-negative.")
        return value

    @validator("global_scale")
    @classmethod
    def validate_scale(cls, scale):
        """Scale range is ordered and positive."""
        lo, hi = scale
        if not 0 < lo <= hi:
            raise ValueError("Scale range must be positive and ordered.")
        return scale

    @validator("min_projected_points")
    @classmethod
    def validate_min_points(cls, count):
        """Threshold is a count."""
        if count < 0:
            raise ValueError("Point threshold must be non-negative.")
        return count
