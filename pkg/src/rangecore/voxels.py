"""Voxelization and the geometric decorator.

Each in-bounds point is annotated with its position, its range to the sensor, and its
offset from the center of the voxel it falls in, plus its relative timestamp when
several frames are aggregated. Pillars are voxels with a single vertical layer.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike

from rangecore.exceptions import OutOfBoundsError, ShapeMismatchError
from rangecore.geometry import Point, PointCloud, bin_index, frozen_array
from rangecore.models.voxels import AffineMap, VoxelSpec
from rangecore.types import Floats, Ints, VoxelKey

GEOMETRIC_FEATURES = ("x", "y", "z", "r", "ox", "oy", "oz")
"""Components of the geometric feature of a single frame."""
TEMPORAL_FEATURE = "t"
"""Extra component of the geometric feature of aggregated frames."""


def geometric_names(with_time: bool = False) -> tuple[str, ...]:
    """Get the names of geometric feature components."""
    return (*GEOMETRIC_FEATURES, TEMPORAL_FEATURE) if with_time else GEOMETRIC_FEATURES


class GeometricFeature(NamedTuple):
    """Raw geometric feature of a point."""

    x: float
    y: float
    z: float
    r: float
    """Range to the sensor origin."""
    ox: float
    """Offsets from the center of the containing voxel."""
    oy: float
    oz: float
    t_rel: float | None = None
    """Relative timestamp, only when frames are aggregated."""

    def as_vector(self) -> Floats:
        """Get the feature as a vector of length 7, or 8 with time."""
        values = self if self.t_rel is not None else self[:-1]
        return np.array(values, dtype=np.float64)


def voxel_indices(xyz: ArrayLike, spec: VoxelSpec) -> tuple[Ints, np.ndarray]:
    """Get voxel index triples of positions and whether each is in bounds."""
    points = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    counts = spec.counts
    indices = np.stack(
        [
            bin_index(points[:, axis], lo, hi, count)
            for axis, (lo, hi, count) in enumerate(
                zip(spec.lows, spec.highs, counts, strict=True)
            )
        ],
        axis=1,
    )
    in_bounds = ((indices >= 0) & (indices < counts)).all(axis=1)
    return indices, in_bounds


def voxel_centers(indices: ArrayLike, spec: VoxelSpec) -> Floats:
    """Get the centers of voxels given their index triples."""
    sizes = (spec.highs - spec.lows) / spec.counts
    return spec.lows + (np.asarray(indices, dtype=np.float64) + 0.5) * sizes


def voxel_index(point: Point, spec: VoxelSpec) -> VoxelKey | None:
    """Get the voxel of a point, or `None` when it is out of bounds."""
    indices, in_bounds = voxel_indices([point.x, point.y, point.z], spec)
    if not in_bounds[0]:
        return None
    ix, iy, iz = (int(i) for i in indices[0])
    return ix, iy, iz


def decorate(
    point: Point, spec: VoxelSpec, with_time: bool = False
) -> GeometricFeature:
    """Get the geometric feature of a point."""
    key = voxel_index(point, spec)
    if key is None:
        raise OutOfBoundsError(f"Point {point[:3]} is outside of the voxel grid.")
    position = np.array([point.x, point.y, point.z])
    offsets = position - voxel_centers(key, spec)
    return GeometricFeature(
        point.x,
        point.y,
        point.z,
        float(np.linalg.norm(position)),
        *(float(o) for o in offsets),
        t_rel=point.t_rel if with_time else None,
    )


def decorate_cloud(
    cloud: PointCloud, spec: VoxelSpec, with_time: bool = False
) -> Floats:
    """Get geometric features of every point, shape (N, 7) or (N, 8) with time.

    Rows of out-of-bounds points are NaN.
    """
    indices, in_bounds = voxel_indices(cloud.xyz, spec)
    features = np.column_stack([
        cloud.xyz,
        np.linalg.norm(cloud.xyz, axis=1),
        cloud.xyz - voxel_centers(indices, spec),
        *([cloud.t_rel] if with_time else []),
    ]).reshape(len(cloud), len(geometric_names(with_time)))
    features[~in_bounds] = np.nan
    return features


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Sparse partition of a cloud's points into voxels."""

    spec: VoxelSpec
    keys: Ints
    """Occupied voxel index triples, shape (M, 3), in ascending flat-index order."""
    members: tuple[Ints, ...]
    """Point indices of each occupied voxel, in input order."""
    out_of_bounds: Ints
    """Indices of points outside of the grid."""

    def __post_init__(self):
        """Freeze arrays."""
        keys = frozen_array(self.keys, np.int64).reshape(-1, 3)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(
            self, "members", tuple(frozen_array(m, np.int64) for m in self.members)
        )
        object.__setattr__(
            self, "out_of_bounds", frozen_array(self.out_of_bounds, np.int64)
        )

    def __len__(self) -> int:
        return len(self.members)

    @property
    def voxels(self) -> dict[VoxelKey, Ints]:
        """Map of voxel index triples to point indices."""
        return {
            (int(ix), int(iy), int(iz)): members
            for (ix, iy, iz), members in zip(self.keys, self.members, strict=True)
        }


def build_grid(cloud: PointCloud, spec: VoxelSpec) -> VoxelGrid:
    """Partition points into voxels, recording out-of-bounds points separately."""
    indices, in_bounds = voxel_indices(cloud.xyz, spec)
    inside = np.flatnonzero(in_bounds)
    _, ny, nz = spec.counts
    flat = (indices[inside, 0] * ny + indices[inside, 1]) * nz + indices[inside, 2]
    order = np.argsort(flat, kind="stable")
    _, starts = np.unique(flat[order], return_index=True)
    members = tuple(np.split(inside[order], starts[1:])) if len(inside) else ()
    logger.debug(
        f"Voxelized {len(cloud)} points into {len(members)} voxels,"
        f" {len(cloud) - len(inside)} out of bounds"
    )
    return VoxelGrid(
        spec=spec,
        keys=indices[inside[order][starts]] if len(inside) else np.empty((0, 3)),
        members=members,
        out_of_bounds=np.flatnonzero(~in_bounds),
    )


def voxel_affine(features: ArrayLike, affine: AffineMap | None = None) -> Floats:
    """Apply an affine map to every point feature. No map means identity."""
    vectors = np.asarray(features, dtype=np.float64)
    if affine is None:
        return vectors.copy()
    w, b = affine.w, affine.b
    if vectors.ndim != 2 or vectors.shape[1] != w.shape[1]:
        raise ShapeMismatchError(
            f"Affine map takes {w.shape[1]} inputs, got features of shape"
            f" {vectors.shape}."
        )
    return vectors @ w.T + b
