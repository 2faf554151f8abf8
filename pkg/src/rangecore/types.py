"""Types."""

from typing import Literal, TypeAlias

import numpy as np
from numpy.typing import NDArray

Channel: TypeAlias = Literal["r", "h", "phi", "i", "m"]
"""Channel of a pseudo range image."""

CHANNELS: tuple[Channel, ...] = ("r", "h", "phi", "i", "m")
"""Range image channels in storage order."""

Pool: TypeAlias = Literal["max", "avg"]
"""Element-wise pooling used to reduce point features to a voxel feature."""

VoxelMode: TypeAlias = Literal["voxel", "pillar"]
"""Regular 3D voxels, or pillars spanning the whole vertical extent."""

Strategy: TypeAlias = Literal["temporal", "spatial"]
"""Multi-frame fusion strategy for range images."""

Floats: TypeAlias = NDArray[np.float64]
"""Array of 64-bit floats."""

Ints: TypeAlias = NDArray[np.int64]
"""Array of 64-bit integers."""

VoxelKey: TypeAlias = tuple[int, int, int]
"""Voxel index triple `(ix, iy, iz)`."""
