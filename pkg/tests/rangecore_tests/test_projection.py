"""Tests for range image projection."""

import numpy as np
import pytest
from pydantic.v1 import ValidationError

from rangecore.exceptions import DegeneratePointError, EmptyPixelError
from rangecore.geometry import Point, PointCloud
from rangecore.models.projection import GridSpec
from rangecore.projection import (
    UNPROJECTED,
    occupancy_rate,
    project,
    project_counts,
    render_channel,
    spherical_coords,
    spherical_of,
    unproject_pixel,
)
from rangecore_tests import cloud, from_spherical, random_cloud


def brute_force(points: PointCloud, spec: GridSpec) -> dict[tuple[int, int], int]:
    """Get the surviving point of each pixel one point at a time."""
    x, y, z = points.xyz.T
    azimuth = np.degrees(np.arctan2(y, x))
    elevation = np.degrees(np.arctan2(z, np.hypot(x, y)))
    ranges = np.linalg.norm(points.xyz, axis=1)
    cols = np.floor(((azimuth - spec.az_min) % 360) / spec.az_step).astype(int)
    rows = np.floor((elevation - spec.el_min) / spec.el_step).astype(int)
    best: dict[tuple[int, int], int] = {}
    for i, (row, col) in enumerate(zip(rows.tolist(), (cols % spec.cols).tolist())):
        if not 0 <= row < spec.rows or ranges[i] == 0:
            continue
        current = best.get((row, col))
        if current is None or ranges[i] < ranges[current]:
            best[row, col] = i
    return best


def check_oracle(points: PointCloud, spec: GridSpec):
    """Check a projection against the brute-force survivors."""
    img = project(points, spec)
    expected = brute_force(points, spec)
    ranges = np.linalg.norm(points.xyz, axis=1)
    assert int(img.mask.sum()) == len(expected)
    for (row, col), index in expected.items():
        assert img.pixel_to_point[row, col] == index
        assert img.channel("r")[row, col] == ranges[index]


def test_default_grid_shape(grid):
    """Default grid is 32 by 1152 pixels."""
    assert (grid.rows, grid.cols) == (32, 1152)


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param({"az_step": 0.0}, id="zero-step"),
        pytest.param({"el_step": -1.0}, id="negative-step"),
        pytest.param({"az_step": 0.7}, id="not-multiple"),
    ],
)
def test_invalid_grid(kwargs):
    """Steps are positive and divide their spans."""
    with pytest.raises(ValidationError):
        GridSpec(**kwargs)


def test_scaled_grid(grid):
    """Refined grids multiply the raster shape."""
    assert grid.scaled(2).shape == (64, 2304)


@pytest.mark.parametrize(
    ("point", "expected"),
    [
        pytest.param(Point(10, 0, 0), (0.0, 0.0, 10.0), id="forward"),
        pytest.param(Point(0, 5, 0), (90.0, 0.0, 5.0), id="left"),
        pytest.param(Point(1, 0, 1), (0.0, 45.0, 1.41421356), id="up"),
    ],
)
def test_spherical_of(point, expected):
    """Azimuth, elevation, and range of points."""
    assert spherical_of(point) == pytest.approx(expected, abs=1e-8)


def test_spherical_of_origin():
    """The sensor origin has no direction."""
    with pytest.raises(DegeneratePointError):
        spherical_of(Point(0, 0, 0))


def test_azimuth_seam():
    """Azimuth lies in (-180, 180]."""
    azimuth = spherical_coords([[-1, 0.0, 0], [-1, -0.0, 0]]).azimuth
    assert azimuth.tolist() == [180.0, 180.0]


def test_single_point(grid):
    """A point straight ahead lands in row 24, column 576."""
    img = project(cloud((10, 0, 0, 0.5)), grid)
    assert int(img.mask.sum()) == 1
    assert img.pixel_to_point[24, 576] == 0
    assert img.pixel_of(0) == (24, 576)
    assert img.channels[:, 24, 576].tolist() == [10.0, 0.0, 0.0, 0.5, 1.0]


def test_seam_wraps_to_first_column(grid):
    """Azimuth of exactly 180 degrees lands in column zero."""
    img = project(cloud((-10, 0, 0)), grid)
    assert img.pixel_of(0) == (24, 0)


def test_closest_point_wins(grid):
    """The closer of two collinear points survives."""
    img = project(cloud((9, 0, 0), (5, 0, 0)), grid)
    assert img.channel("r")[24, 576] == 5
    assert img.point_to_pixel.tolist() == [UNPROJECTED, 24 * 1152 + 576]


def test_range_tie_keeps_lower_index(grid):
    """Ties on range go to the lower point index."""
    img = project(cloud((5, 0, 0, 0.1), (5, 0, 0, 0.9)), grid)
    assert img.pixel_to_point[24, 576] == 0
    assert img.channel("i")[24, 576] == 0.1


def test_empty_cloud(grid):
    """Nothing projects from nothing."""
    img = project(PointCloud.empty(), grid)
    assert not img.mask.any()
    assert occupancy_rate(img) == 0


def test_out_of_view_and_origin(grid):
    """Points above the field of view or at the origin are unprojected."""
    img = project(cloud((0, 0, 0), (1, 0, 5), (10, 0, 0)), grid)
    assert img.point_to_pixel[:2].tolist() == [UNPROJECTED, UNPROJECTED]
    assert project_counts(img) == (2, 1, 0)


def test_occupancy_of_one_pixel(grid):
    """One pixel of the default grid."""
    assert occupancy_rate(project(cloud((10, 0, 0)), grid)) == pytest.approx(
        1 / 36864
    )


def test_full_occupancy(small_grid):
    """Every pixel occupied."""
    azimuth, elevation = np.meshgrid([-135, -45, 45, 135], [-5, 5])
    xyz = from_spherical(azimuth.ravel(), elevation.ravel(), np.full(8, 3.0))
    assert occupancy_rate(project(PointCloud(xyz=xyz), small_grid)) == 1


def test_unproject_pixel(grid):
    """Reconstruction uses the azimuth bin center."""
    img = project(cloud((10, 0, 0)), grid)
    point = unproject_pixel(img, 24, 576)
    assert (point.x, point.y, point.z) == pytest.approx((9.99996, 0.02727, 0), abs=1e-4)


def test_unproject_empty_pixel(grid):
    """Empty pixels have nothing to reconstruct."""
    with pytest.raises(EmptyPixelError):
        unproject_pixel(project(cloud((10, 0, 0)), grid), 0, 0)


def test_round_trip(rng, grid):
    """Points alone in their bin come back up to the azimuth bin width."""
    pixels = rng.choice(grid.rows * grid.cols, size=2000, replace=False)
    rows, cols = np.divmod(pixels, grid.cols)
    azimuth = grid.az_min + (cols + rng.uniform(0.05, 0.95, len(cols))) * grid.az_step
    elevation = grid.el_min + (rows + rng.uniform(0.05, 0.95, len(rows))) * grid.el_step
    ranges = rng.uniform(1, 80, 2000)
    points = PointCloud(xyz=from_spherical(azimuth, elevation, ranges))
    img = project(points, grid)
    assert (img.point_to_pixel != UNPROJECTED).all()
    for index in range(len(points)):
        row, col = img.pixel_of(index)  # type: ignore
        point = unproject_pixel(img, row, col)
        original = points.xyz[index]
        assert np.linalg.norm([point.x, point.y, point.z]) == pytest.approx(
            np.linalg.norm(original), abs=1e-9
        )
        assert point.z == pytest.approx(original[2], abs=1e-9)
        error = np.degrees(
            np.arctan2(point.y, point.x) - np.arctan2(original[1], original[0])
        )
        assert abs((error + 180) % 360 - 180) <= grid.az_step / 2 + 1e-9


def test_count_conservation(rng, grid):
    """Every point is unprojected, surviving, or discarded by a conflict."""
    points = random_cloud(rng, 3000)
    img = project(points, grid)
    counts = project_counts(img)
    assert sum(counts) == len(points)
    assert counts.surviving == int(img.mask.sum())
    assert counts.conflict_discarded > 0


def test_deterministic(rng, grid):
    """Identical input gives identical images."""
    points = random_cloud(rng, 2000)
    a, b = project(points, grid), project(points, grid)
    assert np.array_equal(a.channels, b.channels)
    assert np.array_equal(a.point_to_pixel, b.point_to_pixel)
    assert np.array_equal(a.pixel_to_point, b.pixel_to_point)


def test_maps_round_trip(rng, grid):
    """Surviving points round-trip through the pixel map."""
    img = project(random_cloud(rng, 2000), grid)
    survived = np.flatnonzero(img.point_to_pixel != UNPROJECTED)
    assert np.array_equal(
        img.pixel_to_point.ravel()[img.point_to_pixel[survived]], survived
    )
    assert np.array_equal(img.channel("m") == 1, img.mask)


def test_shrinking_view_never_adds_pixels(rng, grid):
    """A narrower field of view occupies no more pixels."""
    points = random_cloud(rng, 3000)
    narrow = GridSpec(az_min=-90, az_max=90, el_min=-20, el_max=5)
    assert project(points, narrow).mask.sum() <= project(points, grid).mask.sum()


def test_oracle(rng, grid):
    """Stored ranges match the brute-force minimum of each bin."""
    for _ in range(20):
        check_oracle(random_cloud(rng, int(rng.integers(1, 5000))), grid)


@pytest.mark.slow()
def test_oracle_exhaustive(rng, grid):
    """Stored ranges match the brute-force minimum of each bin, many clouds."""
    for _ in range(1000):
        check_oracle(random_cloud(rng, int(rng.integers(1, 5000))), grid)


def test_render_mask(rng, grid):
    """The mask renders binary."""
    img = project(random_cloud(rng, 500), grid)
    raster = render_channel(img, "m")
    assert set(np.unique(raster).tolist()) == {0, 255}
    assert np.array_equal(raster == 255, img.mask)


def test_render_constant(grid):
    """A constant channel renders at the top of the range."""
    img = project(cloud((5, 0, 0), (0, 5, 0)), grid)
    raster = render_channel(img, "r")
    assert raster[img.mask].tolist() == [255, 255]


def test_render_two_ranges(grid):
    """Two ranges map to both ends."""
    img = project(cloud((5, 0, 0), (0, 10, 0)), grid)
    raster = render_channel(img, "r")
    assert raster[24, 576] == 0
    assert raster[img.pixel_of(1)] == 255  # type: ignore


@pytest.mark.parametrize(
    ("spec", "pixel"),
    [
        pytest.param(GridSpec(el_min=0, el_max=10), (0, 576), id="lower-inclusive"),
        pytest.param(GridSpec(el_min=-40, el_max=0), None, id="upper-exclusive"),
    ],
)
def test_elevation_bins_half_open(spec, pixel):
    """Elevation bins include their lower bound only."""
    assert project(cloud((10, 0, 0)), spec).pixel_of(0) == pixel
