"""Rigid-body math, the point cloud container, and oriented boxes.

Coordinates follow the LiDAR frame: x forward, y left, z up, with the sensor at the
origin of each frame. Yaw is counter-clockwise about +z, zero along +x. Computation is
64-bit throughout.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from math import pi, remainder
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from rangecore.exceptions import (
    InvalidBoxError,
    InvalidCloudError,
    InvalidTransformError,
    ShapeMismatchError,
)
from rangecore.types import Floats, Ints

ORTHONORMAL_TOL = 1e-9
"""Tolerance on the entries of `R @ R.T - I` for a valid rotation."""


class Point(NamedTuple):
    """A single LiDAR return."""

    x: float
    y: float
    z: float
    intensity: float = 0.0
    t_rel: float = 0.0
    """Seconds relative to the key frame. Zero for a single frame."""


def frozen_array(values: ArrayLike, dtype=np.float64) -> np.ndarray:
    """Get a contiguous, read-only copy of an array."""
    array = np.array(values, dtype=dtype, copy=True, order="C")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered points. Index identity is the point identity used by projection maps.

    The ring column is carried through from point files but never interpreted.
    """

    xyz: Floats
    """Positions, shape (N, 3)."""
    intensity: Floats = field(default_factory=lambda: np.empty(0))
    """Reflectance, shape (N,)."""
    t_rel: Floats = field(default_factory=lambda: np.empty(0))
    """Relative timestamps in seconds, shape (N,)."""
    ring: Floats = field(default_factory=lambda: np.empty(0))
    """Ring index or zero, shape (N,)."""
    frame_id: str = ""

    def __post_init__(self):
        """Coerce columns to read-only 64-bit arrays, missing ones to zero."""
        xyz = frozen_array(self.xyz).reshape(-1, 3)
        count = len(xyz)
        object.__setattr__(self, "xyz", xyz)
        for name in ("intensity", "t_rel", "ring"):
            column = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if column.size == 0:
                column = np.zeros(count)
            if column.shape != (count,):
                raise ShapeMismatchError(
                    f"Column '{name}' has {column.size} values for {count} points."
                )
            object.__setattr__(self, name, frozen_array(column))
        if not all(
            np.isfinite(column).all()
            for column in (xyz, self.intensity, self.t_rel, self.ring)
        ):
            raise InvalidCloudError("Point clouds hold finite values only.")

    def __len__(self) -> int:
        return len(self.xyz)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.frame_id == other.frame_id and all(
            np.array_equal(a, b)
            for a, b in zip(self.columns(), other.columns(), strict=True)
        )

    __hash__ = None  # type: ignore

    def columns(self) -> tuple[Floats, Floats, Floats, Floats]:
        """Get the positions and the per-point columns."""
        return self.xyz, self.intensity, self.t_rel, self.ring

    def point(self, index: int) -> Point:
        """Get a single point."""
        x, y, z = self.xyz[index]
        return Point(
            float(x),
            float(y),
            float(z),
            float(self.intensity[index]),
            float(self.t_rel[index]),
        )

    @classmethod
    def empty(cls, frame_id: str = "") -> "PointCloud":
        """Get a cloud without points."""
        return cls(xyz=np.empty((0, 3)), frame_id=frame_id)

    def take(self, indices: ArrayLike) -> "PointCloud":
        """Get a subset of points in the order given."""
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            xyz=self.xyz[idx],
            intensity=self.intensity[idx],
            t_rel=self.t_rel[idx],
            ring=self.ring[idx],
        )

    def with_xyz(self, xyz: ArrayLike) -> "PointCloud":
        """Get the same points at new positions."""
        return replace(self, xyz=np.asarray(xyz, dtype=np.float64))

    def with_t_rel(self, t_rel: float | ArrayLike) -> "PointCloud":
        """Get the same points with new relative timestamps."""
        return replace(self, t_rel=np.broadcast_to(np.asarray(t_rel), (len(self),)))


def concat(clouds: Sequence[PointCloud], frame_id: str = "") -> PointCloud:
    """Concatenate clouds in order."""
    if not clouds:
        return PointCloud.empty(frame_id)
    return PointCloud(
        xyz=np.concatenate([c.xyz for c in clouds]),
        intensity=np.concatenate([c.intensity for c in clouds]),
        t_rel=np.concatenate([c.t_rel for c in clouds]),
        ring=np.concatenate([c.ring for c in clouds]),
        frame_id=frame_id or clouds[0].frame_id,
    )


# * -------------------------------------------------------------------------------- * #
# * RIGID TRANSFORMS


def rotation_z(yaw: float) -> Floats:
    """Get the rotation matrix about +z."""
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation followed by translation, `p' = R @ p + t`."""

    rotation: Floats = field(default_factory=lambda: np.eye(3))
    translation: Floats = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        """Validate that the rotation is proper and orthonormal."""
        rotation = frozen_array(self.rotation)
        translation = frozen_array(self.translation)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise ShapeMismatchError("Rigid transforms are a 3x3 matrix and 3-vector.")
        if not np.isfinite(rotation).all() or not np.isfinite(translation).all():
            raise InvalidTransformError("Rigid transforms hold finite values only.")
        if (
            np.abs(rotation @ rotation.T - np.eye(3)).max() > ORTHONORMAL_TOL
            or np.linalg.det(rotation) <= 0
        ):
            raise InvalidTransformError(
                "Rotation must be orthonormal with determinant +1."
            )
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    __hash__ = None  # type: ignore

    @classmethod
    def identity(cls) -> "RigidTransform":
        """Get the identity."""
        return cls()

    @classmethod
    def from_yaw(
        cls, yaw: float, translation: ArrayLike = (0.0, 0.0, 0.0)
    ) -> "RigidTransform":
        """Get a rotation about +z followed by a translation."""
        return cls(rotation_z(yaw), np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_translation(cls, translation: ArrayLike) -> "RigidTransform":
        """Get a pure translation."""
        return cls(translation=np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "RigidTransform":
        """Get a transform from a homogeneous 4x4 matrix."""
        m = np.asarray(matrix, dtype=np.float64).reshape(4, 4)
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise InvalidTransformError(
                "Rows of homogeneous transforms end in [0, 0, 0, 1]."
            )
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> Floats:
        """Get the homogeneous 4x4 matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def is_identity(self) -> bool:
        """Whether this is exactly the identity."""
        return np.array_equal(self.rotation, np.eye(3)) and not self.translation.any()

    def apply(self, xyz: ArrayLike) -> Floats:
        """Transform positions of shape (N, 3)."""
        points = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if self.is_identity:
            return points.copy()
        return points @ self.rotation.T + self.translation


def apply_transform(cloud: PointCloud, transform: RigidTransform) -> PointCloud:
    """Move every point, keeping intensity, timestamps, and order."""
    if transform.is_identity:
        return cloud
    return cloud.with_xyz(transform.apply(cloud.xyz))


def compose(first: RigidTransform, second: RigidTransform) -> RigidTransform:
    """Get the transform applying `second` and then `first`."""
    return RigidTransform(
        rotation=first.rotation @ second.rotation,
        translation=first.rotation @ second.translation + first.translation,
    )


def invert(transform: RigidTransform) -> RigidTransform:
    """Get the inverse transform."""
    rotation = transform.rotation.T
    return RigidTransform(
        rotation=rotation, translation=-rotation @ transform.translation
    )


# * -------------------------------------------------------------------------------- * #
# * ORIENTED BOXES


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = remainder(yaw, 2 * pi)
    return pi if wrapped <= -pi else wrapped


@dataclass(frozen=True)
class OrientedBox:
    """A 3D box upright in z, localized and oriented in the BEV plane.

    Length runs along the heading, width across it.
    """

    cx: float
    cy: float
    cz: float
    l: float  # noqa: E741
    w: float
    h: float
    yaw: float = 0.0
    category: str = ""
    score: float = 1.0
    num_points: int = 0

    def __post_init__(self):
        """Validate extents and normalize yaw."""
        values = (self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)
        if not np.isfinite(values).all() or not np.isfinite(self.score):
            raise InvalidBoxError("Box parameters must be finite.")
        if min(self.l, self.w, self.h) <= 0:
            raise InvalidBoxError("Box extents must be positive.")
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def center(self) -> Floats:
        """Center of the box."""
        return np.array([self.cx, self.cy, self.cz])

    @property
    def extents(self) -> Floats:
        """Length, width, and height."""
        return np.array([self.l, self.w, self.h])

    @property
    def pose(self) -> RigidTransform:
        """Transform from box-local to enclosing coordinates."""
        return RigidTransform.from_yaw(self.yaw, self.center)

    @property
    def bev_area(self) -> float:
        """Footprint area."""
        return self.l * self.w


def box_bev_corners(box: OrientedBox) -> Floats:
    """Get the four BEV corners of a box, counter-clockwise, shape (4, 2)."""
    half_l, half_w = box.l / 2, box.w / 2
    local = np.array([
        [half_l, -half_w],
        [half_l, half_w],
        [-half_l, half_w],
        [-half_l, -half_w],
    ])
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    return local @ np.array([[c, s], [-s, c]]) + [box.cx, box.cy]


def to_box_frame(xyz: ArrayLike, box: OrientedBox) -> Floats:
    """Express positions in box-local coordinates."""
    return invert(box.pose).apply(xyz)


def points_in_box(xyz: ArrayLike, box: OrientedBox) -> np.ndarray:
    """Get a mask of points inside a box, half-open on every axis."""
    local = to_box_frame(xyz, box)
    half = box.extents / 2
    return ((local >= -half) & (local < half)).all(axis=1)


# * -------------------------------------------------------------------------------- * #
# * BINNING


def bin_index(values: ArrayLike, lo: float, hi: float, count: int) -> Ints:
    """Get half-open bin indices of values over `count` equal bins of `[lo, hi)`.

    The index is computed from the fraction of the whole span so that refining a grid
    by a power of two nests exactly. Values outside the span get indices outside
    `[0, count)`.
    """
    fraction = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
    return np.floor(fraction * count).astype(np.int64)
