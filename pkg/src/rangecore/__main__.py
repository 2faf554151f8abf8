"""Command-line interface."""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from sys import stderr

from cyclopts import App
from loguru import logger
from pydantic.v1 import ValidationError

from rangecore import get_default_threads
from rangecore.augment import AugmentRng, GtDatabase, augment_frame
from rangecore.exceptions import RangecoreError, ResolutionMultipleError
from rangecore.fusion import assemble, to_dense_bev
from rangecore.io import (
    atomic_write_text,
    read_boxes,
    read_feature_map,
    read_manifest,
    read_points,
    write_boxes,
    write_feature_map,
    write_image_stack,
    write_pgm,
    write_points,
    write_range_image,
    write_tensor,
    write_voxel_tensor,
)
from rangecore.models.augment import AugmentConfig
from rangecore.models.fusion import FusionConfig, PoolingConfig
from rangecore.models.params import Params
from rangecore.models.postprocess import NmsConfig
from rangecore.models.voxels import VoxelSpec
from rangecore.postprocess import nms as suppress
from rangecore.projection import project as project_cloud
from rangecore.projection import project_counts, render_channel
from rangecore.semantic import (
    FeatureProvider,
    ReferenceFeatures,
    StoredFeatures,
    extract_reference_features,
    sample_point_features,
    sample_temporal_features,
)
from rangecore.temporal import (
    SweepSet,
    align_frames,
    occupancy_report,
    spatial_fuse,
    temporal_fuse,
)
from rangecore.types import CHANNELS, Channel, Floats, Pool, Strategy, VoxelMode

APP = App(help_format="markdown")
"""CLI."""

MANIFEST_SUFFIXES = {".yaml", ".yml"}
"""Input suffixes read as sweep manifests rather than point files."""


def main(tokens: list[str] | None = None):
    """Run a command, reporting library and file errors on a single line."""
    try:
        APP(tokens)
    except (RangecoreError, ValidationError, OSError) as err:
        logger.error(" ".join(str(err).split()) or type(err).__name__)
        raise SystemExit(1) from None


def setup(params: Path | None, verbose: bool) -> Params:
    """Configure logging and load parameters."""
    logger.remove()
    logger.add(
        sink=stderr,
        level="DEBUG" if verbose else "INFO",
        format="<green>{time:mm:ss}</green> | {level} | {message}",
    )
    if params and not params.exists():
        raise FileNotFoundError(f"Parameters file {params} does not exist.")
    return Params(params) if params else Params()


@APP.command
def project(
    points: Path,
    out: Path,
    *,
    render: Path | None = None,
    features: Path | None = None,
    params: Path | None = None,
    threads: int | None = None,
    verbose: bool = False,
):
    """Project a point file onto the range image grid.

    Parameters
    ----------
    points
        Point record file.
    out
        Range image tensor.
    render
        Directory receiving a grayscale PGM per channel.
    features
        Reference feature map tensor.
    params
        Parameters file.
    threads
        Worker threads rendering channels.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    img = project_cloud(read_points(points), p.grid)
    counts = project_counts(img)
    logger.info(
        f"{counts.surviving} points kept, {counts.conflict_discarded} behind closer"
        f" points, {counts.unprojected} unprojected"
    )
    write_range_image(img, out)
    if render:

        def render_to_file(channel: Channel):
            write_pgm(
                render_channel(img, channel), render / f"{points.stem}_{channel}.pgm"
            )

        with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
            list(executor.map(render_to_file, CHANNELS))
    if features:
        write_feature_map(extract_reference_features(img, p.semantic_dim), features)


@APP.command
def fuse(
    manifest: Path,
    out: Path,
    *,
    strategy: Strategy | None = None,
    n: int | None = None,
    params: Path | None = None,
    threads: int | None = None,
    verbose: bool = False,
):
    """Fuse the sweeps of a manifest into range images.

    Temporal fusion writes a stack of per-sweep images, spatial fusion a single image
    on the refined grid.

    Parameters
    ----------
    manifest
        Sweep manifest.
    out
        Fused tensor.
    strategy
        Fusion strategy.
    n
        Resolution multiple of spatial fusion.
    params
        Parameters file.
    threads
        Worker threads.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    cfg = fusion_config(p, strategy, n)
    sweeps = read_manifest(manifest)
    if cfg.strategy == "temporal":
        write_image_stack(temporal_fuse(sweeps, p.grid, resolve_threads(threads)), out)
    else:
        write_range_image(spatial_fuse(sweeps, p.grid, cfg.n), out)


@APP.command
def voxelize(
    points: Path,
    out: Path,
    *,
    features: Path | None = None,
    semantic: bool = True,
    mode: VoxelMode | None = None,
    bev_res: float | None = None,
    pool_sem: Pool | None = None,
    pool_geo: Pool | None = None,
    strategy: Strategy | None = None,
    n: int | None = None,
    dense: bool = False,
    params: Path | None = None,
    threads: int | None = None,
    verbose: bool = False,
):
    """Fuse semantic and geometric point features into voxel features.

    Parameters
    ----------
    points
        Point record file, or a sweep manifest to aggregate with relative timestamps.
    out
        Sparse voxel tensor, or the dense BEV tensor with `--dense`.
    features
        Feature map tensor used instead of reference features.
    semantic
        Fuse semantic features. Without them only geometric features are pooled.
    mode
        Regular voxels or pillars.
    bev_res
        BEV resolution of the default scene.
    pool_sem
        Semantic slice pooling.
    pool_geo
        Geometric slice pooling.
    strategy
        Fusion strategy of manifest inputs.
    n
        Resolution multiple of spatial fusion.
    dense
        Write the dense BEV tensor.
    params
        Parameters file.
    threads
        Worker threads.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    provider: FeatureProvider = (
        StoredFeatures(read_feature_map(features))
        if features
        else ReferenceFeatures(p.semantic_dim)
    )
    multi_frame = points.suffix in MANIFEST_SUFFIXES
    sweeps = (
        read_manifest(points) if multi_frame else SweepSet.single(read_points(points))
    )
    cfg = fusion_config(p, strategy, n) if multi_frame else FusionConfig(n=1)
    cloud = align_frames(sweeps)
    sem = (
        point_semantics(sweeps, p, cfg, provider, resolve_threads(threads))
        if semantic
        else None
    )
    spec = (
        VoxelSpec.for_resolution(bev_res or p.voxels.dx, mode or p.voxels.mode)
        if bev_res or mode
        else p.voxels
    )
    pooling = PoolingConfig(
        semantic_pool=pool_sem or p.pooling.semantic_pool,
        geometric_pool=pool_geo or p.pooling.geometric_pool,
    )
    tensor = assemble(cloud, sem, spec, pooling, multi_frame, p.affine)
    logger.info(f"{len(tensor)} voxels occupied by {len(cloud)} points")
    if dense:
        write_tensor(
            to_dense_bev(tensor),
            out,
            meta={"voxels": spec.dict(), "names": list(tensor.names)},
        )
    else:
        write_voxel_tensor(tensor, out)


@APP.command
def crop(
    database: Path,
    frames: list[Path],
    *,
    threads: int | None = None,
    verbose: bool = False,
):
    """Crop labeled instances of point files into a ground truth database.

    Parameters
    ----------
    database
        Database directory.
    frames
        Point record files, each labeled by a box list of the same stem ending in
        `.jsonl`.
    threads
        Worker threads reading frames.
    verbose
        Log debug messages.
    """
    setup(None, verbose)
    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
        clouds = list(executor.map(read_points, frames))
    GtDatabase(database).build(
        (cloud, read_boxes(frame.with_suffix(".jsonl")))
        for cloud, frame in zip(clouds, frames, strict=True)
    )


@APP.command
def augment(
    frame: Path,
    labels: Path,
    database: Path,
    out: Path,
    out_labels: Path,
    *,
    seed: int | None = None,
    params: Path | None = None,
    threads: int | None = None,
    verbose: bool = False,
):
    """Paste ground truth samples into a frame and transform it globally.

    Parameters
    ----------
    frame
        Point record file.
    labels
        Box list of the frame.
    database
        Ground truth database directory.
    out
        Augmented point record file.
    out_labels
        Box list of annotations kept.
    seed
        Seed of the augmentation generator.
    params
        Parameters file.
    threads
        Worker threads reading the database.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    cfg = AugmentConfig(
        **(p.augment.dict() | ({} if seed is None else {"rng_seed": seed}))
    )
    cloud, boxes = augment_frame(
        read_points(frame),
        read_boxes(labels),
        GtDatabase(database).load(threads=resolve_threads(threads)),
        p.grid,
        cfg,
        AugmentRng.from_seed(cfg.rng_seed),
    )
    logger.info(f"Augmented frame holds {len(cloud)} points and {len(boxes)} boxes")
    write_points(cloud, out)
    write_boxes(boxes, out_labels)


@APP.command
def stats(
    manifest: Path,
    *,
    n_list: str = "1,2,4",
    out: Path | None = None,
    params: Path | None = None,
    threads: int | None = None,
    verbose: bool = False,
):
    """Tabulate occupancy of spatially fused sweeps over resolution multiples.

    Parameters
    ----------
    manifest
        Sweep manifest.
    n_list
        Comma-separated resolution multiples.
    out
        CSV file receiving the table.
    params
        Parameters file.
    threads
        Worker threads.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    multiples = parse_multiples(n_list)
    report = occupancy_report(
        read_manifest(manifest), p.grid, multiples, resolve_threads(threads)
    )
    print(report.to_string(index=False))  # noqa: T201
    if out:
        atomic_write_text(out, report.to_csv(index=False))


@APP.command
def nms(
    boxes: Path,
    out: Path,
    *,
    iou_threshold: float | None = None,
    max_output: int | None = None,
    per_category: bool | None = None,
    params: Path | None = None,
    verbose: bool = False,
):
    """Suppress overlapping boxes.

    Parameters
    ----------
    boxes
        Box list.
    out
        Box list of kept boxes, by descending score.
    iou_threshold
        Boxes overlapping a kept box above this are dropped.
    max_output
        Most boxes kept.
    per_category
        Suppress only within the same category.
    params
        Parameters file.
    verbose
        Log debug messages.
    """
    p = setup(params, verbose)
    overrides = {
        "iou_threshold": iou_threshold,
        "max_output": max_output,
        "per_category": per_category,
    }
    cfg = NmsConfig(
        **(p.nms.dict() | {k: v for k, v in overrides.items() if v is not None})
    )
    candidates = read_boxes(boxes)
    write_boxes([candidates[i] for i in suppress(candidates, cfg)], out)


def parse_multiples(n_list: str) -> list[int]:
    """Parse comma-separated resolution multiples."""
    try:
        multiples = [int(n) for n in n_list.split(",") if n.strip()]
    except ValueError:
        raise ResolutionMultipleError(
            f"Resolution multiples are comma-separated integers, got '{n_list}'."
        ) from None
    if not multiples or min(multiples) < 1:
        raise ResolutionMultipleError(
            f"Resolution multiples must be at least one, got '{n_list}'."
        )
    return multiples


def resolve_threads(threads: int | None) -> int:
    """Get the thread count, from the flag or else the environment."""
    return max(1, threads) if threads is not None else get_default_threads()


def fusion_config(p: Params, strategy: Strategy | None, n: int | None) -> FusionConfig:
    """Override fusion parameters with flags."""
    return FusionConfig(
        strategy=strategy or p.fusion.strategy, n=p.fusion.n if n is None else n
    )


def point_semantics(
    sweeps: SweepSet,
    p: Params,
    cfg: FusionConfig,
    provider: FeatureProvider,
    threads: int,
) -> Floats:
    """Sample semantic features onto aligned points by the fusion strategy."""
    if cfg.strategy == "temporal":
        images = temporal_fuse(sweeps, p.grid, threads)
        return sample_temporal_features([provider(img) for img in images], images)
    img = spatial_fuse(sweeps, p.grid, cfg.n)
    return sample_point_features(provider(img), img)


if __name__ == "__main__":
    main()
