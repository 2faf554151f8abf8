"""Exceptions."""


class RangecoreError(Exception):
    """Base error for point cloud preprocessing."""


class DegeneratePointError(RangecoreError, ValueError):
    """A point at the sensor origin has no direction."""


class EmptyPixelError(RangecoreError, ValueError):
    """A range image pixel holds no point."""


class OutOfBoundsError(RangecoreError, ValueError):
    """A point lies outside of the voxel grid."""


class ShapeMismatchError(RangecoreError, ValueError):
    """Array shapes or counts disagree."""


class PointFileError(RangecoreError, ValueError):
    """A point record file is malformed."""


class TensorFileError(RangecoreError, ValueError):
    """A tensor file and its header disagree."""


class ManifestError(RangecoreError, ValueError):
    """A sweep manifest is incomplete or inconsistent."""


class AugmentRangeError(RangecoreError, ValueError):
    """An augmentation parameter is outside of its configured range."""


class InvalidCloudError(RangecoreError, ValueError):
    """A point cloud holds non-finite values."""


class InvalidTransformError(RangecoreError, ValueError):
    """A rigid transform is non-finite, improper, or not homogeneous."""


class InvalidBoxError(RangecoreError, ValueError):
    """An oriented box is non-finite or has non-positive extents."""


class InvalidSampleError(RangecoreError, ValueError):
    """A ground truth sample has points outside of its box."""


class ResolutionMultipleError(RangecoreError, ValueError):
    """A resolution multiple is not a positive integer."""


class InvalidFeatureError(RangecoreError, ValueError):
    """A feature map is non-finite or narrower than its fixed components."""
