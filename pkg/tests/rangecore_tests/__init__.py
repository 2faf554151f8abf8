"""Helper functions for tests."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from rangecore.geometry import OrientedBox, PointCloud
from rangecore.models.projection import GridSpec


def cloud(*points: Sequence[float], frame_id: str = "") -> PointCloud:
    """Build a cloud from `(x, y, z[, intensity])` tuples."""
    rows = np.zeros((len(points), 4))
    for row, point in zip(rows, points, strict=True):
        row[: len(point)] = point
    return PointCloud(xyz=rows[:, :3], intensity=rows[:, 3], frame_id=frame_id)


def from_spherical(
    azimuth: ArrayLike, elevation: ArrayLike, rng: ArrayLike
) -> np.ndarray:
    """Get positions from azimuth and elevation in degrees and range in meters."""
    az, el = np.radians(azimuth), np.radians(elevation)
    r = np.asarray(rng, dtype=np.float64)
    return np.column_stack([
        r * np.cos(el) * np.cos(az),
        r * np.cos(el) * np.sin(az),
        r * np.sin(el),
    ])


def random_cloud(
    rng: np.random.Generator, count: int, spec: GridSpec | None = None
) -> PointCloud:
    """Get a cloud with points both in and out of view, conflicts and ties included."""
    spec = spec or GridSpec()
    azimuth = rng.uniform(-180, 180, count)
    elevation = rng.uniform(spec.el_min - 5, spec.el_max + 5, count)
    xyz = from_spherical(azimuth, elevation, rng.uniform(1, 60, count))
    if count > 1:
        # Same direction, farther, and exact duplicates
        picks = rng.integers(0, count, count // 4)
        xyz[rng.integers(0, count, len(picks))] = xyz[picks] * rng.uniform(
            0.5, 2, (len(picks), 1)
        )
        xyz[rng.integers(0, count, count // 10)] = xyz[rng.integers(0, count, 1)]
    return PointCloud(xyz=xyz, intensity=rng.uniform(0, 1, count))


def box(
    cx: float = 0.0,
    cy: float = 0.0,
    l: float = 1.0,  # noqa: E741
    w: float = 1.0,
    yaw: float = 0.0,
    score: float = 1.0,
    category: str = "",
    cz: float = 0.0,
    h: float = 1.0,
) -> OrientedBox:
    """Build a box, unit-sized and centered at the origin by default."""
    return OrientedBox(
        cx=cx, cy=cy, cz=cz, l=l, w=w, h=h, yaw=yaw, category=category, score=score
    )


def random_boxes(rng: np.random.Generator, count: int, spread: float = 6.0):
    """Get random boxes with overlaps likely."""
    return [
        box(
            cx=float(rng.uniform(-spread, spread)),
            cy=float(rng.uniform(-spread, spread)),
            l=float(rng.uniform(0.5, 5)),
            w=float(rng.uniform(0.5, 3)),
            yaw=float(rng.uniform(-np.pi, np.pi)),
            score=float(rng.uniform(0, 1)),
        )
        for _ in range(count)
    ]
