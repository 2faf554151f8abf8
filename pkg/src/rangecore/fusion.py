"""Semantic and geometric feature fusion into voxel features."""

from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike

from rangecore.exceptions import ShapeMismatchError
from rangecore.geometry import PointCloud, frozen_array
from rangecore.models.fusion import PoolingConfig
from rangecore.models.voxels import AffineMap, VoxelSpec
from rangecore.types import Floats, Ints, Pool, VoxelKey
from rangecore.voxels import build_grid, decorate_cloud, geometric_names, voxel_affine


@dataclass(frozen=True, eq=False)
class VoxelFeatureTensor:
    """Sparse voxel features, each the pooled `[semantic | geometric]` vector."""

    spec: VoxelSpec
    keys: Ints
    """Occupied voxel index triples, shape (M, 3)."""
    features: Floats
    """Feature vectors, shape (M, semantic_dim + geometric_dim)."""
    semantic_dim: int
    names: tuple[str, ...]
    """Name of each feature component."""

    def __post_init__(self):
        """Freeze arrays and check shapes."""
        keys = frozen_array(self.keys, np.int64).reshape(-1, 3)
        features = frozen_array(self.features).reshape(len(keys), len(self.names))
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "features", features)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        """Feature length."""
        return len(self.names)

    @property
    def entries(self) -> dict[VoxelKey, Floats]:
        """Map of voxel index triples to feature vectors."""
        return {
            (int(ix), int(iy), int(iz)): vector
            for (ix, iy, iz), vector in zip(self.keys, self.features, strict=True)
        }


def fuse_point_features(sem: ArrayLike | None, geo: ArrayLike) -> Floats:
    """Concatenate semantic and geometric features of each point.

    Points without a pixel carry zero semantic vectors, which pass through unchanged.
    """
    geometric = np.asarray(geo, dtype=np.float64)
    geometric = geometric.reshape(len(geometric), -1)
    if sem is None:
        return geometric.copy()
    semantic = np.asarray(sem, dtype=np.float64)
    semantic = semantic.reshape(len(semantic), -1)
    if len(semantic) != len(geometric):
        raise ShapeMismatchError(
            f"Got {len(semantic)} semantic and {len(geometric)} geometric features."
        )
    return np.concatenate([semantic, geometric], axis=1)


def pool_groups(values: Floats, starts: Ints, pool: Pool) -> Floats:
    """Pool contiguous groups of rows element-wise.

    Averages sum each column in sorted order within its group, so that the result is
    bit-identical under any permutation of rows within a group.
    """
    if not len(starts) or not values.shape[1]:
        return np.empty((len(starts), values.shape[1]))
    if pool == "max":
        return np.maximum.reduceat(values, starts, axis=0)
    counts = np.diff(np.append(starts, len(values)))
    groups = np.repeat(np.arange(len(starts)), counts)
    ordered = np.empty_like(values)
    for column in range(values.shape[1]):
        ordered[:, column] = values[np.lexsort((values[:, column], groups)), column]
    return np.add.reduceat(ordered, starts, axis=0) / counts[:, None]


def pool_slices(
    values: Floats, starts: Ints, cfg: PoolingConfig, semantic_dim: int
) -> Floats:
    """Pool the semantic and geometric slices of grouped rows."""
    return np.concatenate(
        [
            pool_groups(values[:, :semantic_dim], starts, cfg.semantic_pool),
            pool_groups(values[:, semantic_dim:], starts, cfg.geometric_pool),
        ],
        axis=1,
    )


def aggregate_voxel(
    vectors: ArrayLike, cfg: PoolingConfig | None = None, semantic_dim: int = 0
) -> Floats:
    """Pool the fused vectors of the points in one voxel."""
    values = np.asarray(vectors, dtype=np.float64)
    if values.ndim != 2 or not len(values):
        raise ShapeMismatchError("Voxels are aggregated from at least one vector.")
    return pool_slices(values, np.array([0]), cfg or PoolingConfig(), semantic_dim)[0]


def assemble(
    cloud: PointCloud,
    sem: ArrayLike | None,
    spec: VoxelSpec,
    cfg: PoolingConfig | None = None,
    with_time: bool = False,
    affine: AffineMap | None = None,
) -> VoxelFeatureTensor:
    """Voxelize, decorate, fuse, and pool a cloud into voxel features.

    Parameters
    ----------
    cloud
        Points in key frame coordinates.
    sem
        Semantic feature per point, or `None` to pool geometric features alone.
    spec
        Voxel grid.
    cfg
        Pooling of each slice.
    with_time
        Whether the geometric feature carries the relative timestamp.
    affine
        Optional map applied to geometric features before fusion.
    """
    cfg = cfg or PoolingConfig()
    grid = build_grid(cloud, spec)
    geo = voxel_affine(decorate_cloud(cloud, spec, with_time), affine)
    fused = fuse_point_features(sem, geo)
    semantic_dim = fused.shape[1] - geo.shape[1]
    names = (
        *(f"sem_{i}" for i in range(semantic_dim)),
        *(
            geometric_names(with_time)
            if affine is None
            else (f"geo_{i}" for i in range(geo.shape[1]))
        ),
    )
    if not len(grid):
        return VoxelFeatureTensor(
            spec=spec,
            keys=np.empty((0, 3)),
            features=np.empty((0, len(names))),
            semantic_dim=semantic_dim,
            names=names,
        )
    order = np.concatenate(grid.members)
    starts = np.cumsum([0, *(len(m) for m in grid.members[:-1])])
    logger.debug(f"Pooling {len(order)} points into {len(grid)} voxels")
    return VoxelFeatureTensor(
        spec=spec,
        keys=grid.keys,
        features=pool_slices(fused[order], starts, cfg, semantic_dim),
        semantic_dim=semantic_dim,
        names=names,
    )


def to_dense_bev(tensor: VoxelFeatureTensor) -> Floats:
    """Scatter voxel features into a dense BEV grid, shape (ny, nx, nz * dim).

    Layers stack along channels, so that entry `(iy, ix, iz * dim + c)` is feature `c`
    of voxel `(ix, iy, iz)`. Empty voxels are zero.
    """
    nx, ny, nz = tensor.spec.counts
    dense = np.zeros((ny, nx, nz, tensor.dim))
    if len(tensor):
        ix, iy, iz = tensor.keys.T
        dense[iy, ix, iz] = tensor.features
    return dense.reshape(ny, nx, nz * tensor.dim)
