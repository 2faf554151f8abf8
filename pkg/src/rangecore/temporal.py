"""Multi-frame aggregation of sweeps and fusion of their range images.

Aggregated points carry their timestamp relative to the key frame, negative for
earlier sweeps. Temporal fusion stacks one range image per sweep, each projected in
its own sensor frame. Spatial fusion projects all sweeps aligned to the key frame onto
a grid `n` times finer, letting points closest in time to the key frame win pixels.
"""

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
import pandas as pd
from loguru import logger

from rangecore.exceptions import ManifestError
from rangecore.geometry import (
    ORTHONORMAL_TOL,
    PointCloud,
    RigidTransform,
    apply_transform,
    concat,
)
from rangecore.models.fusion import FusionConfig
from rangecore.models.projection import GridSpec
from rangecore.projection import UNPROJECTED, RangeImage, occupancy_rate, project
from rangecore.types import Floats

DEFAULT_N_LIST = (1, 2, 4)
"""Resolution multiples reported by default. Each divides the next."""


@dataclass(frozen=True)
class Sweep:
    """A single sweep and its pose relative to the key frame."""

    cloud: PointCloud
    pose: RigidTransform | None
    """Transform from this sweep's sensor frame to the key frame's."""
    timestamp: float
    """Seconds."""


@dataclass(frozen=True)
class SweepSet:
    """Consecutive sweeps anchored at a key frame."""

    frames: tuple[Sweep, ...]
    key_index: int = 0

    def __post_init__(self):
        """Validate poses, timestamps, and the key frame."""
        object.__setattr__(self, "frames", tuple(self.frames))
        for i, frame in enumerate(self.frames):
            if frame.pose is None:
                raise ManifestError(f"Sweep {i} has no pose.")
        if not self.frames:
            return
        if not 0 <= self.key_index < len(self.frames):
            raise ManifestError(
                f"Key index {self.key_index} is not among {len(self.frames)} sweeps."
            )
        key_pose = self.frames[self.key_index].pose
        if key_pose is not None and (
            np.abs(key_pose.as_matrix() - np.eye(4)).max() > ORTHONORMAL_TOL
        ):
            raise ManifestError("Key frame pose must be the identity.")
        timestamps = np.array([frame.timestamp for frame in self.frames])
        if (np.diff(timestamps) <= 0).any():
            raise ManifestError("Sweep timestamps must be strictly increasing.")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def key_timestamp(self) -> float:
        """Timestamp of the key frame."""
        return self.frames[self.key_index].timestamp if self.frames else 0.0

    @classmethod
    def single(cls, cloud: PointCloud, timestamp: float = 0.0) -> "SweepSet":
        """Get a set holding only a key frame."""
        return cls(frames=(Sweep(cloud, RigidTransform.identity(), timestamp),))


def align_frames(sweeps: SweepSet) -> PointCloud:
    """Concatenate all sweeps in key frame coordinates, stamped with relative time.

    Points follow sweep order, then in-sweep order.
    """
    aligned = [
        apply_transform(frame.cloud, frame.pose).with_t_rel(  # type: ignore
            frame.timestamp - sweeps.key_timestamp
        )
        for frame in sweeps.frames
    ]
    frame_id = sweeps.frames[sweeps.key_index].cloud.frame_id if sweeps.frames else ""
    return concat(aligned, frame_id=frame_id)


def temporal_fuse(
    sweeps: SweepSet, spec: GridSpec, threads: int = 1
) -> list[RangeImage]:
    """Project each sweep in its own sensor frame, in sweep order."""
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
        return list(
            executor.map(partial(project, spec=spec), (f.cloud for f in sweeps.frames))
        )


def spatial_fuse(sweeps: SweepSet, spec: GridSpec, n: int = 2) -> RangeImage:
    """Project aligned sweeps onto a grid refined `n` times along both axes.

    Pixel conflicts go to the point closest in time to the key frame, then to the
    closest in range, then to the lowest index.
    """
    cloud = align_frames(sweeps)
    return project(cloud, spec.scaled(n), priority=np.abs(cloud.t_rel))


def fuse(
    sweeps: SweepSet, spec: GridSpec, cfg: FusionConfig | None = None, threads: int = 1
) -> list[RangeImage]:
    """Fuse sweeps by the configured strategy, one image for spatial fusion."""
    cfg = cfg or FusionConfig()
    if cfg.strategy == "temporal":
        return temporal_fuse(sweeps, spec, threads)
    return [spatial_fuse(sweeps, spec, cfg.n)]


def pixel_t_rel(img: RangeImage, cloud: PointCloud) -> Floats:
    """Get the relative timestamp of each pixel's surviving point, NaN when empty."""
    t_rel = np.full(img.spec.shape, np.nan)
    occupied = img.pixel_to_point != UNPROJECTED
    t_rel[occupied] = cloud.t_rel[img.pixel_to_point[occupied]]
    return t_rel


def occupancy_report(
    sweeps: SweepSet,
    spec: GridSpec,
    n_list: Sequence[int] = DEFAULT_N_LIST,
    threads: int = 1,
) -> pd.DataFrame:
    """Tabulate occupancy of spatially fused images over resolution multiples.

    Columns are the multiple `n`, the grid shape, the occupancy rate `tau`, and the
    fraction of aggregated points that survive projection.
    """
    total = sum(len(frame.cloud) for frame in sweeps.frames)
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
        images = list(executor.map(partial(spatial_fuse, sweeps, spec), n_list))
    report = pd.DataFrame({
        "n": list(n_list),
        "rows": [img.spec.rows for img in images],
        "cols": [img.spec.cols for img in images],
        "tau": [occupancy_rate(img) for img in images],
        "kept": [float(img.mask.sum()) / total if total else 0.0 for img in images],
    })
    logger.info(f"Occupancy over {len(sweeps)} sweeps and {total} points")
    return report
