"""Rotated box overlap in the BEV plane and non-maximum suppression."""

from collections.abc import Sequence

import numpy as np
from loguru import logger

from rangecore.geometry import OrientedBox, box_bev_corners
from rangecore.models.postprocess import NmsConfig
from rangecore.types import Floats

AREA_TOL = 1e-12
"""Intersections below this area count as empty."""


def polygon_area(polygon: Floats) -> float:
    """Get the area of a simple polygon by the shoelace formula."""
    if len(polygon) < 3:
        return 0.0
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_polygon(subject: Floats, clip: Floats) -> Floats:
    """Clip a polygon against the half-planes of a counter-clockwise convex polygon.

    Crossings are interpolated from signed distances to each clipping edge, so that a
    segment lying along an edge never divides by zero.
    """
    output = list(subject)
    for start, end in zip(clip, np.roll(clip, -1, axis=0), strict=True):
        if not output:
            break
        edge = end - start
        vertices = output
        distances = [
            edge[0] * (v[1] - start[1]) - edge[1] * (v[0] - start[0]) for v in vertices
        ]
        output = []
        prev, d_prev = vertices[-1], distances[-1]
        for vertex, d in zip(vertices, distances, strict=True):
            if d >= 0:
                if d_prev < 0:
                    output.append(prev + (vertex - prev) * (d_prev / (d_prev - d)))
                output.append(vertex)
            elif d_prev >= 0:
                output.append(prev + (vertex - prev) * (d_prev / (d_prev - d)))
            prev, d_prev = vertex, d
    return np.array(output).reshape(-1, 2)


def bev_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Get the intersection over union of two boxes' footprints, ignoring height."""
    reach = (np.hypot(a.l, a.w) + np.hypot(b.l, b.w)) / 2
    if np.hypot(a.cx - b.cx, a.cy - b.cy) > reach:
        return 0.0
    inter = polygon_area(clip_polygon(box_bev_corners(a), box_bev_corners(b)))
    if inter < AREA_TOL:
        return 0.0
    return float(np.clip(inter / (a.bev_area + b.bev_area - inter), 0.0, 1.0))


def iou_matrix(boxes: Sequence[OrientedBox]) -> Floats:
    """Get the symmetric matrix of pairwise BEV IoU, ones on the diagonal."""
    count = len(boxes)
    matrix = np.eye(count)
    for i in range(count):
        for j in range(i + 1, count):
            matrix[i, j] = matrix[j, i] = bev_iou(boxes[i], boxes[j])
    return matrix


def score_order(boxes: Sequence[OrientedBox]) -> list[int]:
    """Get box indices by descending score, ties by lower index."""
    scores = np.array([box.score for box in boxes], dtype=np.float64)
    return np.lexsort((np.arange(len(boxes)), -scores)).tolist()


def nms(boxes: Sequence[OrientedBox], cfg: NmsConfig | None = None) -> list[int]:
    """Greedily keep the best remaining box and drop boxes overlapping it.

    Boxes overlapping a kept box with IoU above the threshold are suppressed. Returns
    kept indices by descending score, at most `max_output` of them. With
    `per_category`, boxes only suppress boxes of their own category.
    """
    cfg = cfg or NmsConfig()
    kept: list[int] = []
    for index in score_order(boxes):
        if len(kept) == cfg.max_output:
            break
        box = boxes[index]
        if not any(
            bev_iou(boxes[k], box) > cfg.iou_threshold
            for k in kept
            if not cfg.per_category or boxes[k].category == box.category
        ):
            kept.append(index)
    logger.debug(f"Kept {len(kept)} of {len(boxes)} boxes")
    return kept
