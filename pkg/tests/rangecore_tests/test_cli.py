"""Tests for the command-line interface."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from rangecore.__main__ import main
from rangecore.geometry import RigidTransform, concat
from rangecore.io import (
    read_boxes,
    read_feature_map,
    read_points,
    read_range_image,
    read_tensor,
    read_voxel_tensor,
    write_boxes,
    write_manifest,
    write_points,
    write_tensor,
)
from rangecore.voxels import GEOMETRIC_FEATURES
from rangecore_tests import box, cloud, random_cloud

POINT = (10.01, 0.01, 0.01, 0.5)
"""Point clear of voxel boundaries, in the pixel straight ahead."""


@pytest.fixture()
def points(project_dir) -> Path:
    """A point file with a single point ahead."""
    write_points(cloud(POINT), path := project_dir / "000000.bin")
    return path


@pytest.fixture()
def frame(project_dir, rng) -> Path:
    """A labeled point file with a car ten meters ahead."""
    car = cloud(
        *[(10 + dx, dy, 0.2) for dx in (-0.3, 0, 0.3) for dy in (-0.3, 0, 0.3)]
    )
    path = project_dir / "000001.bin"
    write_points(concat([car, random_cloud(rng, 2000)]), path)
    write_boxes([box(cx=10, l=2, w=2, category="car")], path.with_suffix(".jsonl"))
    return path


@pytest.fixture()
def manifest(project_dir, rng) -> Path:
    """Two sweeps anchored at the later one."""
    for i in range(2):
        write_points(random_cloud(rng, 3000), project_dir / f"sweep_{i}.bin")
    write_manifest(
        [
            (
                "sweep_0.bin",
                RigidTransform.from_translation((0.5, 0, 0)).as_matrix(),
                0.0,
            ),
            ("sweep_1.bin", np.eye(4), 0.1),
        ],
        path := project_dir / "sweeps.yaml",
        key_index=1,
    )
    return path


def test_project(points, project_dir):
    """A single point occupies a single pixel."""
    main([
        "project",
        str(points),
        "range.bin",
        "--render",
        "render",
        "--features",
        "features.bin",
    ])
    img = read_range_image(project_dir / "range.bin")
    assert img.channels[4].sum() == 1
    assert img.channels[3:, 24, 576].tolist() == [0.5, 1]
    assert sorted(p.name for p in (project_dir / "render").iterdir()) == [
        f"000000_{c}.pgm" for c in ("h", "i", "m", "phi", "r")
    ]
    assert read_feature_map(project_dir / "features.bin").dim == 64


def test_project_deterministic(project_dir, rng):
    """Projecting gives identical bytes, independent of threads."""
    write_points(random_cloud(rng, 5000), project_dir / "p.bin")
    for out, threads in (("a", "1"), ("b", "8")):
        main(["project", "p.bin", f"{out}.bin", "--render", out, "--threads", threads])
    assert (project_dir / "a.bin").read_bytes() == (project_dir / "b.bin").read_bytes()
    assert (project_dir / "a.yaml").read_text() == (project_dir / "b.yaml").read_text()
    for channel in ("h", "i", "m", "phi", "r"):
        name = f"p_{channel}.pgm"
        assert (project_dir / "a" / name).read_bytes() == (
            project_dir / "b" / name
        ).read_bytes()


def test_bad_point_file(project_dir):
    """Malformed inputs exit with an error code."""
    (project_dir / "bad.bin").write_bytes(b"\0" * 21)
    with pytest.raises(SystemExit) as exc:
        main(["project", "bad.bin", "out.bin"])
    assert exc.value.code == 1
    assert not (project_dir / "out.bin").exists()


@pytest.mark.parametrize(
    "n_list",
    [
        pytest.param("0", id="zero"),
        pytest.param("a,b", id="not-integers"),
        pytest.param(",", id="empty"),
    ],
)
def test_bad_multiples(manifest, n_list):
    """Resolution multiples are positive integers."""
    with pytest.raises(SystemExit) as exc:
        main(["stats", str(manifest), "--n-list", n_list])
    assert exc.value.code == 1


def test_bad_box(project_dir):
    """Boxes have positive extents."""
    (project_dir / "boxes.jsonl").write_text(
        '{"cx": 0, "cy": 0, "cz": 0, "l": 0, "w": 1, "h": 1, "yaw": 0}\n',
        encoding="utf-8",
    )
    with pytest.raises(SystemExit) as exc:
        main(["nms", "boxes.jsonl", "kept.jsonl"])
    assert exc.value.code == 1
    assert not (project_dir / "kept.jsonl").exists()


def test_bad_pose(points, project_dir):
    """Poses are rigid."""
    pose = np.diag([2.0, 2.0, 2.0, 1.0])
    write_manifest([(points.name, pose, 0.0)], project_dir / "sweeps.yaml")
    with pytest.raises(SystemExit) as exc:
        main(["fuse", "sweeps.yaml", "fused.bin"])
    assert exc.value.code == 1


def test_bad_features(points, project_dir):
    """Stored feature maps hold finite values."""
    write_tensor(np.full((32, 1152, 8), np.nan), project_dir / "features.bin")
    with pytest.raises(SystemExit) as exc:
        main(["voxelize", str(points), "voxels.bin", "--features", "features.bin"])
    assert exc.value.code == 1
    assert not (project_dir / "voxels.bin").exists()


def test_missing_params(points):
    """A named parameters file must exist."""
    with pytest.raises(SystemExit) as exc:
        main(["project", str(points), "out.bin", "--params", "missing.yaml"])
    assert exc.value.code == 1


def test_params_file(points, project_dir):
    """Parameters come from the named file."""
    (project_dir / "custom.yaml").write_text(
        "grid:\n  az_step: 1.25\n", encoding="utf-8"
    )
    main(["project", str(points), "range.bin", "--params", "custom.yaml"])
    assert read_range_image(project_dir / "range.bin").spec.shape == (32, 288)


def test_fuse_spatial(manifest, project_dir):
    """Spatial fusion writes one image on the refined grid."""
    main(["fuse", str(manifest), "fused.bin", "--n", "2"])
    img = read_range_image(project_dir / "fused.bin")
    assert img.spec.shape == (64, 2304)


def test_fuse_temporal_threads(manifest, project_dir):
    """Temporal fusion stacks sweeps, independent of threads."""
    for out, threads in (("one.bin", "1"), ("many.bin", "8")):
        main([
            "fuse", str(manifest), out, "--strategy", "temporal", "--threads", threads
        ])
    _, header = read_tensor(project_dir / "one.bin")
    assert header.shape == [2, 32, 1152, 5]
    one = (project_dir / "one.bin").read_bytes()
    assert one == (project_dir / "many.bin").read_bytes()


def test_voxelize(points, project_dir):
    """Semantic and geometric features fuse by default."""
    main(["voxelize", str(points), "voxels.bin"])
    tensor = read_voxel_tensor(project_dir / "voxels.bin")
    assert tensor.keys.tolist() == [[612, 512, 20]]
    assert tensor.semantic_dim == 64
    assert tensor.names[64:] == GEOMETRIC_FEATURES


def test_voxelize_without_semantics(points, project_dir):
    """Geometric features alone."""
    main(["voxelize", str(points), "voxels.bin", "--no-semantic"])
    tensor = read_voxel_tensor(project_dir / "voxels.bin")
    assert tensor.names == GEOMETRIC_FEATURES
    np.testing.assert_allclose(
        tensor.features[0, :4], [*POINT[:3], np.linalg.norm(POINT[:3])], rtol=1e-6
    )


def test_voxelize_dense_pillars(points, project_dir):
    """Dense pillar BEV at a coarse resolution."""
    main([
        "voxelize",
        str(points),
        "bev.bin",
        "--mode",
        "pillar",
        "--bev-res",
        "0.25",
        "--no-semantic",
        "--dense",
    ])
    values, header = read_tensor(project_dir / "bev.bin")
    assert header.shape == [410, 410, 7]
    assert np.count_nonzero(values.any(axis=-1)) == 1


def test_voxelize_manifest(manifest, project_dir):
    """Aggregated sweeps add the relative timestamp."""
    main(["voxelize", str(manifest), "voxels.bin", "--pool-geo", "max"])
    tensor = read_voxel_tensor(project_dir / "voxels.bin")
    assert tensor.names[-1] == "t"
    assert np.isin(tensor.features[:, -1], np.float32([-0.1, 0.0])).all()


def test_crop_and_augment(frame, project_dir):
    """Crop a database, then augment reproducibly from it, independent of threads."""
    main(["crop", "db", str(frame), "--threads", "4"])
    assert (project_dir / "db" / "car" / "samples.jsonl").exists()
    for out, threads in (("a", "1"), ("b", "8")):
        main([
            "augment",
            str(frame),
            str(frame.with_suffix(".jsonl")),
            "db",
            f"{out}.bin",
            f"{out}.jsonl",
            "--seed",
            "3",
            "--threads",
            threads,
        ])
    assert (project_dir / "a.bin").read_bytes() == (project_dir / "b.bin").read_bytes()
    assert read_boxes(project_dir / "a.jsonl") == read_boxes(project_dir / "b.jsonl")
    assert len(read_points(project_dir / "a.bin")) >= len(read_points(frame))


def test_nms(project_dir, rng):
    """Disjoint boxes are capped at the most kept."""
    scores = rng.permutation(150) / 150
    write_boxes(
        [box(cx=3.0 * i, score=float(s)) for i, s in enumerate(scores)],
        project_dir / "boxes.jsonl",
    )
    main(["nms", "boxes.jsonl", "kept.jsonl"])
    kept = read_boxes(project_dir / "kept.jsonl")
    assert len(kept) == 100
    assert [b.score for b in kept] == sorted(scores, reverse=True)[:100]


def test_nms_threshold(project_dir):
    """Flags override parameters."""
    write_boxes(
        [box(score=0.9), box(cx=0.5, score=0.8)], project_dir / "boxes.jsonl"
    )
    main(["nms", "boxes.jsonl", "kept.jsonl", "--iou-threshold", "0.5"])
    assert len(read_boxes(project_dir / "kept.jsonl")) == 2


def test_stats(manifest, project_dir, capsys):
    """Occupancy falls as the grid is refined."""
    main(["stats", str(manifest), "--n-list", "1,2,4", "--out", "stats.csv"])
    table = pd.read_csv(project_dir / "stats.csv")
    assert table["n"].tolist() == [1, 2, 4]
    assert table["tau"].is_monotonic_decreasing
    assert "tau" in capsys.readouterr().out


def test_voxelize_threads(manifest, project_dir):
    """Voxel features do not depend on the thread count."""
    for out, threads in (("one.bin", "1"), ("many.bin", "8")):
        main([
            "voxelize",
            str(manifest),
            out,
            "--strategy",
            "temporal",
            "--threads",
            threads,
        ])
    one = (project_dir / "one.bin").read_bytes()
    assert one == (project_dir / "many.bin").read_bytes()
