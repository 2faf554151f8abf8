"""Per-pixel semantic features and their sampling back onto points.

A trained perspective-view network is out of reach here, so features come from a
provider. The reference provider derives deterministic local features from the range
image alone. Stored feature maps, e.g. real network outputs read from tensor files,
plug in through the same interface.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from math import ceil
from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rangecore.exceptions import InvalidFeatureError, ShapeMismatchError
from rangecore.geometry import frozen_array
from rangecore.models.fusion import SEMANTIC_DIM
from rangecore.projection import UNPROJECTED, RangeImage
from rangecore.types import CHANNELS, Floats

MIN_DIM = 8
"""Smallest supported feature dimension."""

NEIGHBORHOOD_FEATURES = ("r_mean", "r_std", "r_dx", "r_dy")
"""Range statistics over the 3x3 neighborhood, following the raw channels."""

POSITIONAL_BASE = 10_000.0
"""Wavelength base of the sinusoidal pixel position encoding."""


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Feature vector per pixel, shape (rows, cols, dim)."""

    values: Floats

    def __post_init__(self):
        """Freeze and validate values."""
        values = frozen_array(self.values)
        if values.ndim != 3:
            raise ShapeMismatchError("Feature maps have shape (rows, cols, dim).")
        if not np.isfinite(values).all():
            raise InvalidFeatureError("Feature maps hold finite values only.")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:  # noqa: D102
        return self.values.shape[0]

    @property
    def cols(self) -> int:  # noqa: D102
        return self.values.shape[1]

    @property
    def dim(self) -> int:  # noqa: D102
        return self.values.shape[2]


class FeatureProvider(Protocol):
    """Source of per-pixel semantic features for a range image."""

    def __call__(self, img: RangeImage) -> FeatureMap: ...  # noqa: D102


def extract_reference_features(img: RangeImage, dim: int = SEMANTIC_DIM) -> FeatureMap:
    """Get deterministic local features of a range image.

    Components are, in order, the raw channels, the mean and standard deviation of
    range over the 3x3 neighborhood, the horizontal and vertical central differences
    of range, and sinusoidal encodings of pixel row and column. Empty pixels count as
    zero range. Beyond the raster the neighborhood is empty too, except that it
    wraps horizontally on a full-circle grid. Dimensions below the fixed components
    truncate them.
    """
    if dim < MIN_DIM:
        raise InvalidFeatureError(
            f"Feature dimension must be at least {MIN_DIM}, got {dim}."
        )
    r = img.channel("r")
    padded = np.pad(r, ((1, 1), (0, 0)))
    padded = np.pad(
        padded, ((0, 0), (1, 1)), mode="wrap" if img.spec.full_circle else "constant"
    )
    windows = sliding_window_view(padded, (3, 3))
    layers = [
        *img.channels,
        windows.mean(axis=(2, 3)),
        windows.std(axis=(2, 3)),
        (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2,
        (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2,
    ]
    fixed = len(CHANNELS) + len(NEIGHBORHOOD_FEATURES)
    layers.extend(positional_encoding(img.spec.shape, max(dim - fixed, 0)))
    return FeatureMap(np.stack(layers[:dim], axis=-1))


def positional_encoding(shape: tuple[int, int], count: int) -> list[Floats]:
    """Get sinusoidal encodings of pixel row and column.

    Components cycle through sine of row, cosine of row, sine of column, and cosine of
    column, with wavelengths growing geometrically every cycle.
    """
    if not count:
        return []
    rows, cols = np.meshgrid(
        np.arange(shape[0], dtype=np.float64),
        np.arange(shape[1], dtype=np.float64),
        indexing="ij",
    )
    cycles = ceil(count / 4)
    layers: list[Floats] = []
    for j in range(count):
        freq = POSITIONAL_BASE ** (-(j // 4) / cycles)
        position = rows if j % 4 < 2 else cols
        wave = np.sin if j % 2 == 0 else np.cos
        layers.append(wave(position * freq))
    return layers


@dataclass(frozen=True)
class ReferenceFeatures:
    """Provider of reference features."""

    dim: int = SEMANTIC_DIM

    def __call__(self, img: RangeImage) -> FeatureMap:  # noqa: D102
        return extract_reference_features(img, self.dim)


@dataclass(frozen=True)
class StoredFeatures:
    """Provider of externally computed feature maps, e.g. network outputs."""

    fmap: FeatureMap

    def __call__(self, img: RangeImage) -> FeatureMap:  # noqa: D102
        check_shape(self.fmap, img)
        return self.fmap


def check_shape(fmap: FeatureMap, img: RangeImage):
    """Check that a feature map matches an image."""
    if (fmap.rows, fmap.cols) != img.spec.shape:
        raise ShapeMismatchError(
            f"Feature map of {fmap.rows}x{fmap.cols} does not match image of"
            f" {img.spec.rows}x{img.spec.cols}."
        )


def sample_point_features(fmap: FeatureMap, img: RangeImage) -> Floats:
    """Get the feature of each point's pixel, or zeros for points without one.

    Points outside the field of view, at the sensor origin, or behind a closer point
    in their pixel get the zero vector.
    """
    check_shape(fmap, img)
    features = np.zeros((len(img.point_to_pixel), fmap.dim))
    survived = img.point_to_pixel != UNPROJECTED
    features[survived] = fmap.values.reshape(-1, fmap.dim)[
        img.point_to_pixel[survived]
    ]
    return features


def sample_temporal_features(
    fmaps: Sequence[FeatureMap], images: Sequence[RangeImage]
) -> Floats:
    """Sample per-frame features for points aligned frame by frame.

    Each point takes the feature of the pixel it survived in within its own frame's
    image. Rows follow frame order, then in-frame order, as frames are aligned.
    """
    if len(fmaps) != len(images):
        raise ShapeMismatchError(
            f"Got {len(fmaps)} feature maps for {len(images)} range images."
        )
    if not fmaps:
        return np.zeros((0, 0))
    dims = {fmap.dim for fmap in fmaps}
    if len(dims) > 1:
        raise ShapeMismatchError("Per-frame feature maps differ in dimension.")
    return np.concatenate([
        sample_point_features(fmap, img)
        for fmap, img in zip(fmaps, images, strict=True)
    ])
