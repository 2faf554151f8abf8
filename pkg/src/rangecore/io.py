"""File formats.

Point records are headerless little-endian 32-bit floats, five per point: x, y, z,
intensity, and ring or zero. Tensors are a raw little-endian 32-bit payload next to a
YAML header of the same stem holding shape, element type, layout, channel names, and a
digest of the payload. Box lists and sample metadata are JSON lines. Sweep manifests
are YAML. Every write goes to a temporary file that then replaces the target.
"""

import json
from collections.abc import Iterable, Sequence
from hashlib import sha256
from io import StringIO
from os import PathLike
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Any, Literal, NamedTuple, TypeVar

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike
from pydantic.v1 import BaseModel, Field, ValidationError, validator

from rangecore.exceptions import ManifestError, PointFileError, TensorFileError
from rangecore.fusion import VoxelFeatureTensor
from rangecore.geometry import OrientedBox, PointCloud, RigidTransform
from rangecore.models import yaml
from rangecore.models.projection import GridSpec
from rangecore.models.voxels import VoxelSpec
from rangecore.projection import RangeImage
from rangecore.semantic import FeatureMap
from rangecore.temporal import Sweep, SweepSet
from rangecore.types import CHANNELS, Floats

RECORD_FIELDS = 5
"""Values per point record."""
RECORD_DTYPE = np.dtype("<f4")
"""Element type of point records and tensor payloads."""
RECORD_BYTES = RECORD_FIELDS * RECORD_DTYPE.itemsize
"""Bytes per point record."""
LAYOUT = "row-major, channel-last"
"""Layout of every tensor payload."""
HEADER_SUFFIX = ".yaml"
"""Suffix of tensor headers, which share the payload's stem."""

M = TypeVar("M", bound=BaseModel)


def atomic_write(path: Path, data: bytes):
    """Write bytes so that readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
    ) as tmp:
        temporary = Path(tmp.name)
        try:
            tmp.write(data)
        except BaseException:
            tmp.close()
            temporary.unlink(missing_ok=True)
            raise
    try:
        temporary.replace(path)
    except BaseException:
        temporary.unlink(missing_ok=True)
        raise


def atomic_write_text(path: Path, text: str):
    """Write UTF-8 text atomically."""
    atomic_write(path, text.encode("utf-8"))


# * -------------------------------------------------------------------------------- * #
# * POINTS


def read_points(path: Path | str) -> PointCloud:
    """Read a point record file, keeping record order."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) % RECORD_BYTES:
        raise PointFileError(
            f"{path} holds {len(data)} bytes, not a multiple of {RECORD_BYTES}."
        )
    records = np.frombuffer(data, dtype=RECORD_DTYPE).reshape(-1, RECORD_FIELDS)
    if bad := int((~np.isfinite(records).all(axis=1)).sum()):
        raise PointFileError(f"{path} holds {bad} records with non-finite values.")
    records = records.astype(np.float64)
    return PointCloud(
        xyz=records[:, :3],
        intensity=records[:, 3],
        ring=records[:, 4],
        frame_id=path.stem,
    )


def write_points(cloud: PointCloud, path: Path | str):
    """Write a cloud as point records. Relative timestamps are not stored."""
    records = np.column_stack([cloud.xyz, cloud.intensity, cloud.ring])
    atomic_write(Path(path), records.astype(RECORD_DTYPE).tobytes())


# * -------------------------------------------------------------------------------- * #
# * TENSORS


class TensorHeader(BaseModel):
    """Sidecar header of a tensor payload."""

    shape: list[int]
    dtype: Literal["f32"] = "f32"
    layout: Literal["row-major, channel-last"] = LAYOUT
    channels: list[str] = Field(
        default_factory=list, description="Name of each entry along the last axis."
    )
    meta: dict[str, Any] = Field(default_factory=dict)
    digest: str = Field(
        default="", description="SHA-256 of the payload, unchecked when empty."
    )

    @validator("channels")
    @classmethod
    def validate_channels(cls, channels, values):
        """Channel names cover the last axis."""
        shape = values.get("shape")
        if channels and shape and len(channels) != shape[-1]:
            raise ValueError("Channel names do not match the last axis.")
        return channels

    @property
    def size(self) -> int:
        """Payload size in bytes."""
        return int(np.prod(self.shape)) * RECORD_DTYPE.itemsize


def header_path(path: Path) -> Path:
    """Get the header path of a tensor payload."""
    return Path(path).with_suffix(HEADER_SUFFIX)


def write_tensor(
    array: ArrayLike,
    path: Path | str,
    channels: Sequence[str] = (),
    meta: dict[str, Any] | None = None,
):
    """Write a tensor payload, then its header.

    The header records a digest of the payload, so a payload left beside a stale
    header by an interrupted write is rejected on read.
    """
    path = Path(path)
    values = np.ascontiguousarray(array, dtype=RECORD_DTYPE)
    payload = values.tobytes()
    header = TensorHeader(
        shape=list(values.shape),
        channels=list(channels),
        meta=meta or {},
        digest=sha256(payload).hexdigest(),
    )
    stream = StringIO()
    yaml.dump(header.dict(), stream)
    atomic_write(path, payload)
    atomic_write_text(header_path(path), stream.getvalue())


def read_tensor(path: Path | str) -> tuple[np.ndarray, TensorHeader]:
    """Read a tensor payload and its header."""
    path = Path(path)
    try:
        header = TensorHeader(**yaml.load(header_path(path)))
    except (ValidationError, TypeError) as err:
        raise TensorFileError(f"Malformed header for {path}.") from err
    data = path.read_bytes()
    if len(data) != header.size:
        raise TensorFileError(
            f"{path} holds {len(data)} bytes but its header of shape {header.shape}"
            f" needs {header.size}."
        )
    if header.digest and sha256(data).hexdigest() != header.digest:
        raise TensorFileError(f"{path} does not match the digest in its header.")
    return np.frombuffer(data, dtype=RECORD_DTYPE).reshape(header.shape), header


class RangeTensor(NamedTuple):
    """Range image channels read back from a tensor file."""

    spec: GridSpec
    channels: np.ndarray
    """Channels `r`, `h`, `phi`, `i`, `m` of shape (5, rows, cols), 32-bit."""


def write_range_image(img: RangeImage, path: Path | str):
    """Write the channels of a range image, shape (rows, cols, 5)."""
    write_tensor(
        np.moveaxis(img.channels, 0, -1),
        path,
        channels=CHANNELS,
        meta={"grid": img.spec.dict()},
    )


def read_range_image(path: Path | str) -> RangeTensor:
    """Read range image channels and their grid."""
    values, header = read_tensor(path)
    spec = GridSpec(**header.meta.get("grid", {}))
    if header.shape != [*spec.shape, len(CHANNELS)]:
        raise TensorFileError(
            f"Header shape {header.shape} does not match grid {spec.shape}."
        )
    return RangeTensor(spec=spec, channels=np.moveaxis(values, -1, 0))


def write_image_stack(images: Sequence[RangeImage], path: Path | str):
    """Write per-frame range images as one tensor, shape (K, rows, cols, 5)."""
    if not images:
        raise TensorFileError("No range images to write.")
    write_tensor(
        np.stack([np.moveaxis(img.channels, 0, -1) for img in images]),
        path,
        channels=CHANNELS,
        meta={"grid": images[0].spec.dict(), "frames": len(images)},
    )


def write_feature_map(fmap: FeatureMap, path: Path | str):
    """Write a feature map, shape (rows, cols, dim)."""
    write_tensor(
        fmap.values, path, channels=[f"sem_{i}" for i in range(fmap.dim)]
    )


def read_feature_map(path: Path | str) -> FeatureMap:
    """Read a feature map, e.g. one produced by a perspective-view network."""
    values, header = read_tensor(path)
    if len(header.shape) != 3:
        raise TensorFileError(f"Feature maps have three axes, got {header.shape}.")
    return FeatureMap(values.astype(np.float64))


def write_voxel_tensor(tensor: VoxelFeatureTensor, path: Path | str):
    """Write sparse voxel features as rows of index triple then features."""
    write_tensor(
        np.column_stack([tensor.keys, tensor.features]).reshape(
            len(tensor), 3 + tensor.dim
        ),
        path,
        channels=["ix", "iy", "iz", *tensor.names],
        meta={"voxels": tensor.spec.dict(), "semantic_dim": tensor.semantic_dim},
    )


def read_voxel_tensor(path: Path | str) -> VoxelFeatureTensor:
    """Read sparse voxel features."""
    values, header = read_tensor(path)
    if (
        len(header.shape) != 2
        or header.channels[:3] != ["ix", "iy", "iz"]
        or "voxels" not in header.meta
    ):
        raise TensorFileError(f"{path} is not a sparse voxel tensor.")
    return VoxelFeatureTensor(
        spec=VoxelSpec(**header.meta["voxels"]),
        keys=values[:, :3].astype(np.int64),
        features=values[:, 3:].astype(np.float64),
        semantic_dim=int(header.meta.get("semantic_dim", 0)),
        names=tuple(header.channels[3:]),
    )


def write_pgm(raster: np.ndarray, path: Path | str):
    """Write an 8-bit grayscale raster as binary PGM."""
    pixels = np.ascontiguousarray(raster, dtype=np.uint8)
    rows, cols = pixels.shape
    atomic_write(Path(path), f"P5\n{cols} {rows}\n255\n".encode() + pixels.tobytes())


# * -------------------------------------------------------------------------------- * #
# * RECORDS


class BoxRecord(BaseModel):
    """Line record of an oriented box."""

    cx: float
    cy: float
    cz: float
    l: float  # noqa: E741
    w: float
    h: float
    yaw: float
    category: str = ""
    score: float = 1.0
    num_points: int = 0

    @classmethod
    def from_box(cls, box: OrientedBox, **kwargs):
        """Get the record of a box."""
        return cls(**vars(box), **kwargs)

    def to_box(self) -> OrientedBox:
        """Get the box of this record."""
        return OrientedBox(**self.dict(include=set(BoxRecord.__fields__)))


class SampleRecord(BoxRecord):
    """Line record of a ground truth sample in the database."""

    file: str = Field(description="Point record file, relative to the category.")
    source_frame: str = ""


def write_records(records: Iterable[BaseModel], path: Path | str):
    """Write records as JSON lines."""
    atomic_write_text(Path(path), "".join(f"{r.json()}\n" for r in records))


def read_records(path: Path | str, model: type[M]) -> list[M]:
    """Read JSON line records, skipping blank lines."""
    return [
        model.parse_raw(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def read_boxes(path: Path | str) -> list[OrientedBox]:
    """Read a box list."""
    return [record.to_box() for record in read_records(path, BoxRecord)]


def write_boxes(boxes: Iterable[OrientedBox], path: Path | str):
    """Write a box list."""
    write_records((BoxRecord.from_box(box) for box in boxes), path)


# * -------------------------------------------------------------------------------- * #
# * SWEEP MANIFESTS


class FrameEntry(BaseModel):
    """One sweep of a manifest."""

    path: Path = Field(description="Point record file, relative to the manifest.")
    pose: list[float] | None = Field(
        default=None, description="Row-major 4x4 transform to the key frame."
    )
    timestamp: float = Field(description="Seconds.")

    @validator("pose", pre=True)
    @classmethod
    def flatten_pose(cls, pose):
        """Accept nested rows as well as a flat list."""
        if pose is None:
            return pose
        return np.asarray(pose, dtype=np.float64).ravel().tolist()

    @validator("pose")
    @classmethod
    def validate_pose(cls, pose):
        """Poses have sixteen entries."""
        if pose is not None and len(pose) != 16:
            raise ValueError("Poses are row-major 4x4 matrices of sixteen entries.")
        return pose


class Manifest(BaseModel):
    """Sweeps anchored at a key frame."""

    key_index: int = 0
    frames: list[FrameEntry]


def read_manifest(path: Path | str) -> SweepSet:
    """Read a sweep manifest and the point files it lists."""
    path = Path(path)
    try:
        manifest = Manifest(**(yaml.load(path) or {}))
    except (ValidationError, TypeError) as err:
        raise ManifestError(f"Malformed manifest {path}.") from err
    frames: list[Sweep] = []
    for i, entry in enumerate(manifest.frames):
        if entry.pose is None:
            raise ManifestError(f"Sweep {i} of {path} has no pose.")
        frames.append(
            Sweep(
                cloud=read_points(path.parent / entry.path),
                pose=RigidTransform.from_matrix(entry.pose),
                timestamp=entry.timestamp,
            )
        )
    logger.debug(f"Read {len(frames)} sweeps from {path}")
    return SweepSet(frames=tuple(frames), key_index=manifest.key_index)


def write_manifest(
    entries: Sequence[tuple[PathLike[str] | str, Floats, float]],
    path: Path | str,
    key_index: int = 0,
):
    """Write a sweep manifest of point file paths, 4x4 poses, and timestamps."""
    manifest = Manifest(
        key_index=key_index,
        frames=[
            FrameEntry(
                path=Path(file),
                pose=np.asarray(pose, dtype=np.float64).ravel().tolist(),
                timestamp=timestamp,
            )
            for file, pose, timestamp in entries
        ],
    )
    stream = StringIO()
    yaml.dump(json.loads(manifest.json()), stream)
    atomic_write_text(Path(path), stream.getvalue())
