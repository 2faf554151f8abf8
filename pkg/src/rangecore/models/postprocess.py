"""Non-maximum suppression settings."""

from pydantic.v1 import BaseModel, Field, validator


class NmsConfig(BaseModel):
    """Score-ordered non-maximum suppression in the BEV plane."""

    class Config:
        """Model config."""

        frozen = True

    iou_threshold: float = Field(
        default=0.2, description="Boxes overlapping a kept box above this are dropped."
    )
    max_output: int = Field(default=100, description="Most boxes kept.")
    per_category: bool = Field(
        default=False, description="Suppress only within the same category."
    )

    @validator("iou_threshold")
    @classmethod
    def validate_threshold(cls, threshold):
        """Threshold is an IoU."""
        if not 0 <= threshold <= 1:
            raise ValueError("IoU threshold must be within [0, 1].")
        return threshold

    @validator("max_output")
    @classmethod
    def validate_max_output(cls, max_output):
        """At least one box is kept."""
        if max_output < 1:
            raise ValueError("Output cap must be at least one.")
        return max_output
