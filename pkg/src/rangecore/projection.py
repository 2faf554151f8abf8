"""Pseudo range image projection.

Points are binned on an evenly spaced azimuth and elevation grid instead of native
LiDAR rings, which are unevenly spaced or missing altogether. When several points land
in one pixel the closest one survives.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike

from rangecore.exceptions import DegeneratePointError, EmptyPixelError
from rangecore.geometry import Point, PointCloud, bin_index, frozen_array
from rangecore.models.projection import GridSpec
from rangecore.types import CHANNELS, Channel, Floats, Ints

UNPROJECTED = -1
"""Map entry of a point without a pixel, or of a pixel without a point."""

FULL_TURN = 360.0
"""Degrees in a full turn of azimuth."""


class Spherical(NamedTuple):
    """Direction and distance of points from the sensor."""

    azimuth: Floats
    """Degrees in (-180, 180]."""
    elevation: Floats
    """Degrees above the horizontal plane."""
    range: Floats
    """Meters."""
    elevation_rad: Floats
    """Radians above the horizontal plane."""


def spherical_coords(xyz: ArrayLike) -> Spherical:
    """Get spherical coordinates of positions of shape (N, 3)."""
    points = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    x, y, z = points.T
    azimuth = np.degrees(np.arctan2(y, x))
    azimuth = np.where(azimuth <= -180.0, azimuth + FULL_TURN, azimuth)
    elevation_rad = np.arctan2(z, np.hypot(x, y))
    return Spherical(
        azimuth=azimuth,
        elevation=np.degrees(elevation_rad),
        range=np.linalg.norm(points, axis=1),
        elevation_rad=elevation_rad,
    )


def spherical_of(point: Point) -> tuple[float, float, float]:
    """Get azimuth and elevation in degrees and range in meters of a point."""
    coords = spherical_coords([point.x, point.y, point.z])
    if coords.range[0] == 0:
        raise DegeneratePointError(f"Point {point[:3]} is at the sensor origin.")
    return float(coords.azimuth[0]), float(coords.elevation[0]), float(coords.range[0])


def pixel_coords(coords: Spherical, spec: GridSpec) -> tuple[Ints, Ints, np.ndarray]:
    """Get row and column of every point and whether it falls in the field of view.

    Bins are half-open with inclusive lower bounds. On a full-circle grid the azimuth
    seam wraps, so +180 degrees lands in column zero.
    """
    if spec.full_circle:
        cols = bin_index(
            np.mod(coords.azimuth - spec.az_min, FULL_TURN), 0.0, FULL_TURN, spec.cols
        )
        cols %= spec.cols
    else:
        cols = bin_index(coords.azimuth, spec.az_min, spec.az_max, spec.cols)
    rows = bin_index(coords.elevation, spec.el_min, spec.el_max, spec.rows)
    in_fov = (
        (coords.range > 0)
        & (rows >= 0)
        & (rows < spec.rows)
        & (cols >= 0)
        & (cols < spec.cols)
    )
    return rows, cols, in_fov


@dataclass(frozen=True, eq=False)
class RangeImage:
    """Five-channel angular raster and the maps between points and pixels."""

    spec: GridSpec
    channels: Floats
    """Channels `r`, `h`, `phi`, `i`, `m` of shape (5, rows, cols)."""
    point_to_pixel: Ints
    """Flat pixel index per input point, or `UNPROJECTED`."""
    pixel_to_point: Ints
    """Index of the surviving point per pixel, or `UNPROJECTED`. Shape (rows, cols)."""
    in_fov: np.ndarray
    """Whether each input point fell in the field of view, surviving or not."""

    def __post_init__(self):
        """Freeze arrays."""
        for name, dtype in (
            ("channels", np.float64),
            ("point_to_pixel", np.int64),
            ("pixel_to_point", np.int64),
            ("in_fov", np.bool_),
        ):
            object.__setattr__(self, name, frozen_array(getattr(self, name), dtype))

    def channel(self, name: Channel) -> Floats:
        """Get a channel raster."""
        return self.channels[CHANNELS.index(name)]

    @property
    def mask(self) -> np.ndarray:
        """Occupancy mask as booleans."""
        return self.pixel_to_point != UNPROJECTED

    def pixel_of(self, index: int) -> tuple[int, int] | None:
        """Get the pixel of a point, if it survived."""
        flat = int(self.point_to_pixel[index])
        if flat == UNPROJECTED:
            return None
        row, col = divmod(flat, self.spec.cols)
        return row, col


def project(
    cloud: PointCloud, spec: GridSpec, priority: ArrayLike | None = None
) -> RangeImage:
    """Project a cloud onto the grid, keeping the closest point per pixel.

    Parameters
    ----------
    cloud
        Points in sensor coordinates.
    spec
        Angular grid.
    priority
        Optional per-point key ranked before range when resolving pixel conflicts,
        lower first. Ties after range go to the lower point index.
    """
    coords = spherical_coords(cloud.xyz)
    rows, cols, in_fov = pixel_coords(coords, spec)
    candidates = np.flatnonzero(in_fov)
    pixels = rows[candidates] * spec.cols + cols[candidates]
    keys = [candidates, coords.range[candidates]]
    if priority is not None:
        keys.append(np.asarray(priority, dtype=np.float64)[candidates])
    keys.append(pixels)
    order = np.lexsort(keys)
    sorted_pixels = pixels[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_pixels[1:] != sorted_pixels[:-1]
    survivors = candidates[order[first]]
    survivor_pixels = sorted_pixels[first]

    pixel_to_point = np.full(spec.rows * spec.cols, UNPROJECTED, dtype=np.int64)
    pixel_to_point[survivor_pixels] = survivors
    point_to_pixel = np.full(len(cloud), UNPROJECTED, dtype=np.int64)
    point_to_pixel[survivors] = survivor_pixels

    channels = np.zeros((len(CHANNELS), spec.rows * spec.cols))
    for channel, values in zip(
        channels,
        (
            coords.range[survivors],
            cloud.xyz[survivors, 2],
            coords.elevation_rad[survivors],
            cloud.intensity[survivors],
            np.ones(len(survivors)),
        ),
        strict=True,
    ):
        channel[survivor_pixels] = values
    logger.debug(
        f"Projected {len(cloud)} points: {len(survivors)} kept,"
        f" {len(candidates) - len(survivors)} behind closer points,"
        f" {len(cloud) - len(candidates)} outside the field of view"
    )
    return RangeImage(
        spec=spec,
        channels=channels.reshape(len(CHANNELS), spec.rows, spec.cols),
        point_to_pixel=point_to_pixel,
        pixel_to_point=pixel_to_point.reshape(spec.shape),
        in_fov=in_fov,
    )


class ProjectionCounts(NamedTuple):
    """Where the points of a projection went."""

    unprojected: int
    """Outside the field of view or at the sensor origin."""
    surviving: int
    conflict_discarded: int
    """In view, but behind a closer point in the same pixel."""


def project_counts(img: RangeImage) -> ProjectionCounts:
    """Break the projected cloud down by what happened to each point."""
    surviving = int(img.mask.sum())
    in_fov = int(img.in_fov.sum())
    return ProjectionCounts(
        unprojected=len(img.in_fov) - in_fov,
        surviving=surviving,
        conflict_discarded=in_fov - surviving,
    )


def occupancy_rate(img: RangeImage) -> float:
    """Get the fraction of occupied pixels."""
    return float(img.mask.sum()) / img.mask.size


def unproject_pixel(img: RangeImage, row: int, col: int) -> Point:
    """Reconstruct a point from a pixel at the azimuth bin center."""
    if not img.mask[row, col]:
        raise EmptyPixelError(f"Pixel ({row}, {col}) is empty.")
    r, _, phi, intensity, _ = img.channels[:, row, col]
    azimuth = np.radians(img.spec.az_min + (col + 0.5) * img.spec.az_step)
    return Point(
        x=float(r * np.cos(phi) * np.cos(azimuth)),
        y=float(r * np.cos(phi) * np.sin(azimuth)),
        z=float(r * np.sin(phi)),
        intensity=float(intensity),
    )


def render_channel(
    img: RangeImage, channel: Channel, out_range: tuple[int, int] = (0, 255)
) -> np.ndarray:
    """Render a channel to 8-bit grayscale.

    Occupied pixels map linearly from the channel's occupied minimum and maximum onto
    `out_range`. A constant channel renders at the top of the range. Empty pixels
    render zero.
    """
    lo, hi = out_range
    raster = np.zeros(img.spec.shape, dtype=np.uint8)
    mask = img.mask
    if not mask.any():
        return raster
    values = img.channel(channel)[mask]
    v_min, v_max = values.min(), values.max()
    if v_max == v_min:
        raster[mask] = hi
        return raster
    scaled = (values - v_min) / (v_max - v_min) * (hi - lo) + lo
    raster[mask] = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    return raster
