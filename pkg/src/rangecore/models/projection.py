"""Angular grid of the pseudo range image."""

from pydantic.v1 import BaseModel, Field, validator

from rangecore.exceptions import ResolutionMultipleError

MULTIPLE_TOL = 1e-9
"""Tolerance on extents being integer multiples of their steps."""


def count_steps(lo: float, hi: float, step: float) -> int:
    """Get the number of whole steps spanning an interval."""
    return round((hi - lo) / step)


def is_multiple(lo: float, hi: float, step: float) -> bool:
    """Check whether an interval is an integer multiple of a step."""
    steps = (hi - lo) / step
    return abs(steps - round(steps)) <= MULTIPLE_TOL and round(steps) >= 1


class GridSpec(BaseModel):
    """Evenly spaced azimuth and elevation grid. Angles in degrees."""

    class Config:
        """Model config."""

        frozen = True

    # ! AZIMUTH

    az_min: float = Field(default=-180.0, description="Lowest azimuth (deg).")
    az_max: float = Field(default=180.0, description="Highest azimuth (deg).")
    az_step: float = Field(default=0.3125, description="Azimuth resolution (deg).")

    # ! ELEVATION

    el_min: float = Field(default=-30.0, description="Lowest elevation (deg).")
    el_max: float = Field(default=10.0, description="Highest elevation (deg).")
    el_step: float = Field(default=1.25, description="Elevation resolution (deg).")

    @validator("az_step", "el_step")
    @classmethod
    def validate_step(cls, step):
        """Steps must be positive."""
        if step <= 0:
            raise ValueError("Angular steps must be positive.")
        return step

    @validator("az_step")
    @classmethod
    def validate_az_multiple(cls, az_step, values):
        """Azimuth span must be a whole number of steps."""
        if not is_multiple(values["az_min"], values["az_max"], az_step):
            raise ValueError("Azimuth span is not an integer multiple of its step.")
        return az_step

    @validator("el_step")
    @classmethod
    def validate_el_multiple(cls, el_step, values):
        """Elevation span must be a whole number of steps."""
        if not is_multiple(values["el_min"], values["el_max"], el_step):
            raise ValueError("Elevation span is not an integer multiple of its step.")
        return el_step

    @property
    def cols(self) -> int:
        """Number of azimuth bins."""
        return count_steps(self.az_min, self.az_max, self.az_step)

    @property
    def rows(self) -> int:
        """Number of elevation bins."""
        return count_steps(self.el_min, self.el_max, self.el_step)

    @property
    def shape(self) -> tuple[int, int]:
        """Raster shape, rows by columns."""
        return self.rows, self.cols

    @property
    def full_circle(self) -> bool:
        """Whether azimuth covers the whole horizon, so that the seam wraps."""
        return abs(self.az_max - self.az_min - 360.0) <= MULTIPLE_TOL

    def scaled(self, n: int) -> "GridSpec":
        """Get the grid refined `n` times along both angular axes."""
        if n < 1:
            raise ResolutionMultipleError("Resolution multiple must be at least one.")
        return self.copy(
            update=dict(az_step=self.az_step / n, el_step=self.el_step / n)
        )
