"""Ground truth crop-and-paste augmentation with occlusion filtering.

Ground truth instances are cropped offline into a database. During augmentation they
are pasted back at their recorded pose after a random rotation about the sensor
center, which keeps their distance to the sensor. Annotations with too few points
surviving range projection of the assembled frame are removed, since a real sensor
would not see them. Global transforms follow.

Draws come from a seeded generator in a fixed sequence: translation x, translation y,
rotation, scale, then one yaw delta per pasted sample in paste order. Which samples
are pasted is drawn from a separate stream split off the same seed.
"""

from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from loguru import logger

from rangecore.exceptions import AugmentRangeError, InvalidSampleError
from rangecore.geometry import (
    OrientedBox,
    PointCloud,
    RigidTransform,
    apply_transform,
    concat,
    points_in_box,
    to_box_frame,
)
from rangecore.io import (
    SampleRecord,
    read_points,
    read_records,
    write_points,
    write_records,
)
from rangecore.models.augment import AugmentConfig
from rangecore.models.projection import GridSpec
from rangecore.postprocess import bev_iou
from rangecore.projection import UNPROJECTED, project

INSIDE_TOL = 1e-6
"""Tolerance on sample points lying inside their box."""
ANGLE_TOL = 1e-12
"""Tolerance on a yaw delta exceeding its configured range."""
SAMPLES_FILE = "samples.jsonl"
"""Name of the per-category sample metadata file."""


@dataclass(frozen=True)
class GtSample:
    """A cropped ground truth instance.

    The box holds the recorded pose, while points are box-local: centered at the
    origin with zero yaw.
    """

    box: OrientedBox
    points: PointCloud
    category: str
    source_frame: str = ""

    def __post_init__(self):
        """Check that points lie inside the box."""
        half = self.box.extents / 2
        local = self.points.xyz
        if ((local < -half - INSIDE_TOL) | (local >= half + INSIDE_TOL)).any():
            raise InvalidSampleError("Sample points must lie inside their box.")


def crop_instances(
    frame: PointCloud, boxes: Iterable[OrientedBox]
) -> list[GtSample]:
    """Crop the points inside each box into box-local samples."""
    samples: list[GtSample] = []
    for box in boxes:
        inside = np.flatnonzero(points_in_box(frame.xyz, box))
        points = frame.take(inside)
        samples.append(
            GtSample(
                box=replace(box, num_points=len(inside)),
                points=points.with_xyz(to_box_frame(points.xyz, box)),
                category=box.category,
                source_frame=frame.frame_id,
            )
        )
    return samples


def place_sample(
    sample: GtSample, placement_yaw_delta: float, cfg: AugmentConfig | None = None
) -> tuple[PointCloud, OrientedBox]:
    """Restore a sample at its recorded pose, rotated about the sensor origin."""
    cfg = cfg or AugmentConfig()
    if abs(placement_yaw_delta) > cfg.paste_rotation_max + ANGLE_TOL:
        raise AugmentRangeError(
            f"Yaw delta {placement_yaw_delta} exceeds {cfg.paste_rotation_max}."
        )
    about_origin = RigidTransform.from_yaw(placement_yaw_delta)
    world = about_origin.apply(sample.box.pose.apply(sample.points.xyz))
    cx, cy, _ = about_origin.apply(sample.box.center)[0]
    world[:, 2] += cfg.z_offset
    box = replace(
        sample.box,
        cx=float(cx),
        cy=float(cy),
        cz=sample.box.cz + cfg.z_offset,
        yaw=sample.box.yaw + placement_yaw_delta,
    )
    return sample.points.with_xyz(world), box


def paste_sample(
    frame: PointCloud,
    sample: GtSample,
    placement_yaw_delta: float,
    cfg: AugmentConfig | None = None,
) -> tuple[PointCloud, OrientedBox]:
    """Paste a sample into a frame after rotating it about the sensor origin.

    The rotation moves the box center and turns the box by the same angle, so the
    center keeps its distance to the sensor.
    """
    points, box = place_sample(sample, placement_yaw_delta, cfg)
    return concat([frame, points], frame_id=frame.frame_id), box


# * -------------------------------------------------------------------------------- * #
# * GLOBAL TRANSFORMS


class GlobalDraw(NamedTuple):
    """One draw of the global transform."""

    tx: float
    ty: float
    rotation: float
    scale: float


class AugmentRng(NamedTuple):
    """Generators split off one seed."""

    main: np.random.Generator
    """Global transform and yaw delta draws."""
    selection: np.random.Generator
    """Choice of pasted samples."""

    @classmethod
    def from_seed(cls, seed: int) -> "AugmentRng":
        """Split generators off a seed."""
        main, selection = np.random.SeedSequence(seed).spawn(2)
        return cls(np.random.default_rng(main), np.random.default_rng(selection))


def draw_global(cfg: AugmentConfig, rng: np.random.Generator) -> GlobalDraw:
    """Draw translation x, translation y, rotation, and scale, in that order."""
    return GlobalDraw(
        tx=float(rng.uniform(-cfg.global_translation, cfg.global_translation)),
        ty=float(rng.uniform(-cfg.global_translation, cfg.global_translation)),
        rotation=float(rng.uniform(-cfg.global_rotation, cfg.global_rotation)),
        scale=float(rng.uniform(*cfg.global_scale)),
    )


def apply_global(
    frame: PointCloud, boxes: Sequence[OrientedBox], draw: GlobalDraw
) -> tuple[PointCloud, list[OrientedBox]]:
    """Scale, then rotate about z, then translate in x and y."""
    transform = RigidTransform.from_yaw(draw.rotation, (draw.tx, draw.ty, 0.0))
    moved = apply_transform(frame.with_xyz(frame.xyz * draw.scale), transform)
    moved_boxes: list[OrientedBox] = []
    for box in boxes:
        cx, cy, cz = transform.apply(box.center * draw.scale)[0]
        moved_boxes.append(
            replace(
                box,
                cx=float(cx),
                cy=float(cy),
                cz=float(cz),
                l=box.l * draw.scale,
                w=box.w * draw.scale,
                h=box.h * draw.scale,
                yaw=box.yaw + draw.rotation,
            )
        )
    return moved, moved_boxes


def global_augment(
    frame: PointCloud,
    boxes: Sequence[OrientedBox],
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[PointCloud, list[OrientedBox]]:
    """Randomly scale, rotate, and translate a frame and its boxes together."""
    return apply_global(frame, boxes, draw_global(cfg, rng))


# * -------------------------------------------------------------------------------- * #
# * VISIBILITY


def projected_counts(
    frame: PointCloud, boxes: Sequence[OrientedBox], spec: GridSpec
) -> list[int]:
    """Count the points of each box that survive range projection of the frame."""
    survived = project(frame, spec).point_to_pixel != UNPROJECTED
    return [int((points_in_box(frame.xyz, box) & survived).sum()) for box in boxes]


def visibility_filter(
    frame: PointCloud,
    boxes: Sequence[OrientedBox],
    spec: GridSpec,
    min_projected_points: int = 3,
) -> list[OrientedBox]:
    """Keep boxes with enough of their points surviving range projection.

    The frame must be fully assembled, pasted samples included, so that occlusion by
    any point is accounted for.
    """
    counts = projected_counts(frame, boxes, spec)
    kept = [
        box
        for box, count in zip(boxes, counts, strict=True)
        if count >= min_projected_points
    ]
    logger.debug(f"Visibility filter removed {len(boxes) - len(kept)} boxes")
    return kept


def collides(box: OrientedBox, others: Iterable[OrientedBox]) -> bool:
    """Whether a box overlaps any other in the BEV plane."""
    return any(bev_iou(box, other) > 0 for other in others)


def augment_frame(
    frame: PointCloud,
    boxes: Sequence[OrientedBox],
    samples: Sequence[GtSample],
    spec: GridSpec,
    cfg: AugmentConfig | None = None,
    rng: AugmentRng | None = None,
) -> tuple[PointCloud, list[OrientedBox]]:
    """Paste samples, filter annotations by visibility, then transform globally.

    Samples whose box overlaps an existing box are rejected before projection.
    """
    cfg = cfg or AugmentConfig()
    rng = rng or AugmentRng.from_seed(cfg.rng_seed)
    draw = draw_global(cfg, rng.main)
    chosen = rng.selection.permutation(len(samples))[: cfg.paste_count]
    deltas = rng.main.uniform(
        -cfg.paste_rotation_max, cfg.paste_rotation_max, size=len(chosen)
    )
    all_boxes = list(boxes)
    pasted = [frame]
    rejected = 0
    for index, delta in zip(chosen, deltas, strict=True):
        points, box = place_sample(samples[index], float(delta), cfg)
        if collides(box, all_boxes):
            rejected += 1
            continue
        pasted.append(points)
        all_boxes.append(box)
    assembled = concat(pasted, frame_id=frame.frame_id)
    logger.debug(f"Pasted {len(pasted) - 1} samples, rejected {rejected} colliding")
    kept = visibility_filter(assembled, all_boxes, spec, cfg.min_projected_points)
    return apply_global(assembled, kept, draw)


# * -------------------------------------------------------------------------------- * #
# * DATABASE


@dataclass(frozen=True)
class GtDatabase:
    """Samples on disk, one directory per category.

    Each directory holds a point record file per sample and a line of metadata per
    sample in `samples.jsonl`.
    """

    root: Path

    def save(self, samples: Sequence[GtSample]):
        """Write samples, replacing the metadata of categories present."""
        by_category: dict[str, list[SampleRecord]] = {}
        for sample in samples:
            directory = self.root / (sample.category or "unlabeled")
            directory.mkdir(parents=True, exist_ok=True)
            records = by_category.setdefault(sample.category or "unlabeled", [])
            file = f"{len(records):06d}.bin"
            write_points(sample.points, directory / file)
            records.append(
                SampleRecord.from_box(
                    sample.box, file=file, source_frame=sample.source_frame
                )
            )
        for category, records in by_category.items():
            write_records(records, self.root / category / SAMPLES_FILE)

    def build(
        self, frames: Iterable[tuple[PointCloud, Sequence[OrientedBox]]]
    ) -> list[GtSample]:
        """Crop every labeled frame and save the samples."""
        samples = [
            sample for frame, boxes in frames for sample in crop_instances(frame, boxes)
        ]
        self.save(samples)
        logger.info(f"Saved {len(samples)} samples to {self.root}")
        return samples

    def load(
        self, categories: Iterable[str] | None = None, threads: int = 1
    ) -> list[GtSample]:
        """Read samples, categories in sorted order, samples in file order."""
        wanted = set(categories) if categories is not None else None
        entries = [
            (meta.parent, record)
            for meta in sorted(self.root.glob(f"*/{SAMPLES_FILE}"))
            if wanted is None or meta.parent.name in wanted
            for record in read_records(meta, SampleRecord)
        ]
        files = [path / record.file for path, record in entries]
        with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
            points = list(executor.map(read_points, files))
        return [
            GtSample(
                box=record.to_box(),
                points=cloud,
                category=record.category,
                source_frame=record.source_frame,
            )
            for (_, record), cloud in zip(entries, points, strict=True)
        ]
