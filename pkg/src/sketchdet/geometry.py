"""Box arithmetic, IoU, NMS, region cropping, and canvas tiling layout.

Boxes are half-open pixel rectangles in image coordinates (origin top-left):
area = (x2 - x1) * (y2 - y1). All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BoxError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise BoxError(f"non-finite box coordinate in {self.coords()}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise BoxError(f"degenerate box {self.coords()}")

    def coords(self):
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self):
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Placement:
    box: Box
    source_index: int
    scale: float


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU between two box lists as an (len(a), len(b)) array."""
    if not boxes_a or not boxes_b:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.coords() for b in boxes_a])
    b = np.array([b.coords() for b in boxes_b])
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def nms(boxes, scores, iou_threshold):
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-scoring remaining box and removes every box
    with IoU >= iou_threshold against it. Equal scores tie-break to the lower
    original index. Returns kept indices in score-descending order.
    """
    if len(boxes) != len(scores):
        raise BoxError(f"{len(boxes)} boxes but {len(scores)} scores")
    if not 0.0 < iou_threshold < 1.0:
        raise BoxError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    if len(boxes) == 0:
        return []
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(np.isnan(scores)):
        raise BoxError("NaN score passed to nms")
    # stable sort on -score keeps lower original index first among ties
    order = np.argsort(-scores, kind="stable")
    pair_iou = iou_matrix(boxes, boxes)
    kept = []
    alive = np.ones(len(boxes), dtype=bool)
    for idx in order:
        if not alive[idx]:
            continue
        kept.append(int(idx))
        alive &= pair_iou[idx] < iou_threshold
    return kept


def crop_resize(raster: np.ndarray, box: Box, out_side: int) -> np.ndarray:
    """Crop a box from a raster and return a square out_side x out_side patch.

    The box is clipped to the raster bounds, padded to square with zeros
    (centered, aspect preserved) and bilinearly resized. Raster layout is
    (H, W) or (H, W, C) with float values.
    """
    h, w = raster.shape[:2]
    x1 = max(0.0, min(box.x1, float(w)))
    x2 = max(0.0, min(box.x2, float(w)))
    y1 = max(0.0, min(box.y1, float(h)))
    y2 = max(0.0, min(box.y2, float(h)))
    if x2 - x1 <= 0.0 or y2 - y1 <= 0.0:
        raise BoxError(f"box {box.coords()} lies outside raster of size {(w, h)}")
    side = max(x2 - x1, y2 - y1)
    # center the clipped crop inside a square source window of that side
    cx = 0.5 * (x1 + x2)
    cy = 0.5 * (y1 + y2)
    sx1 = cx - 0.5 * side
    sy1 = cy - 0.5 * side
    # sample positions at output pixel centers, mapped into the source window
    t = (np.arange(out_side) + 0.5) * (side / out_side)
    xs = sx1 + t
    ys = sy1 + t
    return _bilinear_sample(raster, xs, ys, x_valid=(x1, x2), y_valid=(y1, y2))


def _bilinear_sample(raster, xs, ys, x_valid, y_valid):
    """Bilinear sampling of a pixel grid with zero padding outside the valid span."""
    h, w = raster.shape[:2]
    chans = raster.shape[2] if raster.ndim == 3 else 1
    flat = raster.reshape(h, w, chans).astype(np.float64)

    gx = xs - 0.5
    gy = ys - 0.5
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    fx = gx - x0
    fy = gy - y0

    def gather(yi, xi):
        # zero outside the valid crop span (padding), clamp for indexing
        yv = (yi >= np.floor(y_valid[0])) & (yi <= np.ceil(y_valid[1]) - 1) & (yi >= 0) & (yi < h)
        xv = (xi >= np.floor(x_valid[0])) & (xi <= np.ceil(x_valid[1]) - 1) & (xi >= 0) & (xi < w)
        yc = np.clip(yi, 0, h - 1)
        xc = np.clip(xi, 0, w - 1)
        vals = flat[yc[:, None], xc[None, :], :]
        mask = (yv[:, None] & xv[None, :]).astype(np.float64)
        return vals * mask[:, :, None]

    v00 = gather(y0, x0)
    v01 = gather(y0, x0 + 1)
    v10 = gather(y0 + 1, x0)
    v11 = gather(y0 + 1, x0 + 1)
    wx = fx[None, :, None]
    wy = fy[:, None, None]
    out = (
        v00 * (1 - wy) * (1 - wx)
        + v01 * (1 - wy) * wx
        + v10 * wy * (1 - wx)
        + v11 * wy * wx
    )
    if raster.ndim == 2:
        return out[:, :, 0]
    return out


def resize(raster: np.ndarray, out_side: int) -> np.ndarray:
    """Bilinear resize of a square raster to out_side x out_side."""
    h, w = raster.shape[:2]
    return crop_resize(raster, Box(0.0, 0.0, float(w), float(h)), out_side)


def tile_layout(n, canvas_side, object_sides, max_pair_iou, rng):
    """Randomly place n square tiles on a canvas with bounded pairwise overlap.

    Each tile gets uniform position and scale jitter in [0.7, 1.3]; placements
    are rejection-sampled so every pair has IoU <= max_pair_iou. After 200
    failed attempts for one tile the lowest-overlap candidate seen is accepted,
    which guarantees termination.
    """
    if not 1 <= n <= 7:
        raise BoxError(f"n must be in [1, 7], got {n}")
    if len(object_sides) != n:
        raise BoxError(f"expected {n} object sides, got {len(object_sides)}")
    placements = []
    for i in range(n):
        if object_sides[i] > canvas_side:
            raise BoxError(f"object side {object_sides[i]} exceeds canvas {canvas_side}")
        best = None
        best_overlap = np.inf
        for _ in range(200):
            scale = rng.uniform(0.7, 1.3)
            side = min(object_sides[i] * scale, float(canvas_side))
            x = rng.uniform(0.0, canvas_side - side)
            y = rng.uniform(0.0, canvas_side - side)
            cand = Box(x, y, x + side, y + side)
            overlap = max((iou(cand, p.box) for p in placements), default=0.0)
            if overlap <= max_pair_iou:
                best = Placement(cand, i, scale)
                best_overlap = overlap
                break
            if overlap < best_overlap:
                best = Placement(cand, i, scale)
                best_overlap = overlap
        placements.append(best)
    return placements
