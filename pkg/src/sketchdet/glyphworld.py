"""Procedural sketch/photo corpus at desk scale.

Each category is a base polygon family plus a fixed set of named appendage
templates and a fill texture; instances vary vertex radii, appendage pose and
hue. The same unit-frame geometry drives two renderers: a stroke-only sketch
(white background, thin jittered strokes) and a filled, textured photo on a
cluttered background. Scenes tile object photos onto a noise canvas and carry
ground-truth boxes for evaluation only.

All randomness derives from (seed, item index) so generation order never
changes outputs. Rasters are float arrays in [0, 1] quantized to 256 levels,
which makes PNG round-trips exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Box, Placement, resize, tile_layout

APPENDAGE_KINDS = ("head", "legs", "tail", "antennae", "fins")

# fixed pool of appendage combinations; a seeded shuffle assigns one per
# category so no two categories share (vertex count, appendages)
_APPENDAGE_COMBOS = [
    ("head",),
    ("legs",),
    ("tail",),
    ("antennae",),
    ("fins",),
    ("head", "legs"),
    ("head", "tail"),
    ("legs", "antennae"),
    ("tail", "fins"),
    ("head", "antennae"),
    ("legs", "fins"),
    ("antennae", "tail"),
]

_TEXTURES = ("solid", "stripes", "dots", "rings")

_BODY_RADIUS = (0.12, 0.18)
_MAX_STROKE_LENGTH = 1.05  # unit frame; keeps sketch ink under the 2% background budget
_PHOTO_FIT = 0.78  # glyph bounding square is zoomed to this fraction of the photo frame
_QUANT = 255.0


def _quantize(raster):
    return np.round(np.clip(raster, 0.0, 1.0) * _QUANT) / _QUANT


def _hsv_to_rgb(h, s, v):
    h = h % 1.0
    i = int(h * 6.0)
    f = h * 6.0 - i
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i % 6]


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlyphCategory:
    id: int
    n_vertices: int
    symmetric: bool
    appendages: tuple
    texture: str
    hue_base: float


@dataclass
class GlyphInstance:
    category_id: int
    instance_seed: int
    strokes: list  # list of (K, 2) float arrays in the unit frame
    parts: dict  # part name -> list of stroke indices
    body_vertices: np.ndarray  # (V, 2) closed polygon for photo fill
    fills: list  # (kind, params) primitives filled in the photo renderer
    hue: float
    texture: str
    texture_phase: float
    texture_freq: float
    noise_grid: np.ndarray  # (G, G, 3) photo background value noise
    blobs: list  # distractor blobs behind the glyph

    def part_names(self):
        return sorted(self.parts)

    def part_box_unit(self, part_name, pad=0.01):
        """Bounding box of a named part's strokes in the unit frame."""
        if part_name not in self.parts:
            raise KeyError(
                f"unknown part {part_name!r}; available: {self.part_names()}"
            )
        pts = np.concatenate([self.strokes[i] for i in self.parts[part_name]])
        x1, y1 = pts.min(axis=0) - pad
        x2, y2 = pts.max(axis=0) + pad
        return Box(float(x1), float(y1), float(x2), float(y2))

    def glyph_box_unit(self):
        pts = np.concatenate(self.strokes)
        x1, y1 = pts.min(axis=0)
        x2, y2 = pts.max(axis=0)
        return Box(float(x1), float(y1), float(x2), float(y2))


@dataclass(frozen=True)
class SketchPhotoPair:
    sketch: np.ndarray  # (S, S) grayscale
    photo: np.ndarray  # (S, S, 3) color
    instance: GlyphInstance
    variant: int


@dataclass
class SceneCanvas:
    photo: np.ndarray  # (H, W, 3)
    entries: list  # (Box, category_id, instance_seed) -- evaluation only
    y: np.ndarray  # (num_categories + 1,) 0/1, slot 0 is background
    scene_id: int = 0


@dataclass
class Corpus:
    seed: int
    object_side: int
    num_categories: int
    categories: list
    instances: dict = field(default_factory=dict)  # (cid, iseed) -> GlyphInstance
    photos: dict = field(default_factory=dict)  # (cid, iseed) -> raster
    sketches: dict = field(default_factory=dict)  # (cid, iseed, variant) -> raster
    sketches_per_instance: int = 0

    def instance_keys(self, categories=None):
        keys = sorted(self.instances)
        if categories is None:
            return keys
        cats = set(categories)
        return [k for k in keys if k[0] in cats]

    def pairs(self, categories=None):
        for cid, iseed in self.instance_keys(categories):
            inst = self.instances[(cid, iseed)]
            for v in range(self.sketches_per_instance):
                yield SketchPhotoPair(
                    sketch=self.sketches[(cid, iseed, v)],
                    photo=self.photos[(cid, iseed)],
                    instance=inst,
                    variant=v,
                )

    def restrict(self, categories):
        """Sub-corpus over the given categories; shares rasters."""
        cats = set(categories)
        sub = Corpus(
            seed=self.seed,
            object_side=self.object_side,
            num_categories=self.num_categories,
            categories=[c for c in self.categories if c.id in cats],
            sketches_per_instance=self.sketches_per_instance,
        )
        for (cid, iseed), inst in self.instances.items():
            if cid in cats:
                sub.instances[(cid, iseed)] = inst
                sub.photos[(cid, iseed)] = self.photos[(cid, iseed)]
                for v in range(self.sketches_per_instance):
                    sub.sketches[(cid, iseed, v)] = self.sketches[(cid, iseed, v)]
        return sub


# ---------------------------------------------------------------------------
# Raster primitives (unit-frame geometry, any output side)
# ---------------------------------------------------------------------------


def _pixel_centers(side):
    c = (np.arange(side) + 0.5) / side
    return c


def _value_noise(grid, side, base, amplitude):
    """Bilinear upsample of a (G, G, 3) grid; resolution consistent."""
    g = grid.shape[0]
    t = _pixel_centers(side) * (g - 1)
    i0 = np.floor(t).astype(int)
    i0 = np.clip(i0, 0, g - 2)
    f = t - i0
    a = grid[np.ix_(i0, i0)]
    b = grid[np.ix_(i0, i0 + 1)]
    c = grid[np.ix_(i0 + 1, i0)]
    d = grid[np.ix_(i0 + 1, i0 + 1)]
    fy = f[:, None, None]
    fx = f[None, :, None]
    up = a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx
    return base + amplitude * (up - 0.5)


def _polygon_mask(verts, side):
    """Point-in-polygon test at pixel centers (crossing number)."""
    c = _pixel_centers(side)
    px = np.broadcast_to(c[None, :], (side, side))
    py = np.broadcast_to(c[:, None], (side, side))
    inside = np.zeros((side, side), dtype=bool)
    v = np.asarray(verts)
    n = len(v)
    for k in range(n):
        x1, y1 = v[k]
        x2, y2 = v[(k + 1) % n]
        cond = (y1 <= py) != (y2 <= py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (px < xint)
    return inside


def _disc_mask(center, radius, side):
    c = _pixel_centers(side)
    dx = c[None, :] - center[0]
    dy = c[:, None] - center[1]
    return dx * dx + dy * dy <= radius * radius


def _blob_alpha(center, radii, angle, softness, side):
    """Soft-edged rotated ellipse alpha in [0, 1]."""
    c = _pixel_centers(side)
    dx = c[None, :] - center[0]
    dy = c[:, None] - center[1]
    ca, sa = np.cos(angle), np.sin(angle)
    u = (dx * ca + dy * sa) / radii[0]
    w = (-dx * sa + dy * ca) / radii[1]
    d = np.sqrt(u * u + w * w)
    return np.clip((1.0 - d) / softness, 0.0, 1.0)


def _stroke_pixels(points, side, width_px=1):
    """Integer pixel coordinates covered by a polyline drawn width_px wide.

    Steps along the driving axis of each segment so a 1 px stroke covers about
    max(|dx|, |dy|) pixels, like a Bresenham line.
    """
    pts = np.asarray(points) * side
    segs = []
    for k in range(len(pts) - 1):
        p, q = pts[k], pts[k + 1]
        d = q - p
        steps = max(2, int(np.ceil(max(np.abs(d[0]), np.abs(d[1])))) + 1)
        t = np.linspace(0.0, 1.0, steps)[:, None]
        segs.append(p[None, :] * (1 - t) + q[None, :] * t)
    if not segs:
        return np.zeros((0, 2), dtype=int)
    samples = np.concatenate(segs)
    base = np.floor(samples).astype(int)
    if width_px <= 1:
        px = base
    else:
        r = (width_px - 1) / 2.0
        offs = [
            (ox, oy)
            for ox in range(-int(np.ceil(r)), int(np.ceil(r)) + 1)
            for oy in range(-int(np.ceil(r)), int(np.ceil(r)) + 1)
            if ox * ox + oy * oy <= (r + 0.4) ** 2
        ]
        px = (base[:, None, :] + np.asarray(offs)[None, :, :]).reshape(-1, 2)
    px = px[(px[:, 0] >= 0) & (px[:, 0] < side) & (px[:, 1] >= 0) & (px[:, 1] < side)]
    return px


def _paint_strokes(raster, strokes, color, side, width_px=1):
    for stroke in strokes:
        px = _stroke_pixels(stroke, side, width_px)
        if len(px):
            raster[px[:, 1], px[:, 0]] = color


# ---------------------------------------------------------------------------
# Category / instance generation
# ---------------------------------------------------------------------------


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence(key))


def make_categories(num_categories, seed):
    rng = _rng(seed, 0xC47)
    combos = list(_APPENDAGE_COMBOS)
    rng.shuffle(combos)
    vertex_cycle = [3, 4, 5, 6, 7, 8]
    cats = []
    for cid in range(num_categories):
        cats.append(
            GlyphCategory(
                id=cid,
                n_vertices=vertex_cycle[cid % len(vertex_cycle)],
                symmetric=bool((cid // len(vertex_cycle)) % 2 == 0),
                appendages=tuple(combos[cid % len(combos)]),
                texture=_TEXTURES[cid % len(_TEXTURES)],
                hue_base=(0.11 + 0.618034 * cid) % 1.0,
            )
        )
    return cats


def _circle_points(center, radius, n=12, start=0.0):
    ang = start + np.linspace(0.0, 2 * np.pi, n + 1)
    return np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1)


def _cap_stroke_length(strokes, verts, fills):
    """Shrink geometry about the frame center so total stroke length stays bounded.

    The sketch renderer draws 1 px strokes, so ink area scales with stroke
    length; capping it keeps every sketch raster >= 98% background at side 64.
    """
    total = sum(float(np.sum(np.hypot(*np.diff(s, axis=0).T))) for s in strokes)
    if total <= _MAX_STROKE_LENGTH:
        return strokes, verts, fills
    s = _MAX_STROKE_LENGTH / total

    def shrink_pts(p):
        return (np.asarray(p) - 0.5) * s + 0.5

    strokes = [shrink_pts(st) for st in strokes]
    verts = shrink_pts(verts)
    capped = []
    for kind, params in fills:
        if kind == "disc":
            c, r = params
            capped.append((kind, (shrink_pts(c), r * s)))
        elif kind == "line":
            a, b = params
            capped.append((kind, (shrink_pts(a), shrink_pts(b))))
        else:
            capped.append((kind, shrink_pts(params)))
    return strokes, verts, capped


def make_instance(category, instance_seed, corpus_seed):
    """Deterministic glyph geometry for (category, instance seed)."""
    rng = _rng(corpus_seed, 0x91F, category.id, instance_seed)
    n = category.n_vertices
    center = np.array([0.5, 0.5])
    phase = rng.uniform(-0.25, 0.25)
    angles = phase + np.linspace(0.0, 2 * np.pi, n, endpoint=False) - np.pi / 2
    lo, hi = _BODY_RADIUS
    if category.symmetric:
        half = rng.uniform(lo, hi, size=(n + 1) // 2)
        radii = np.concatenate([half, half[: n // 2][::-1]])[:n]
    else:
        radii = rng.uniform(lo, hi, size=n)
    verts = np.stack(
        [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)], axis=1
    )

    strokes = [np.concatenate([verts, verts[:1]], axis=0)]
    parts = {"body": [0]}
    fills = [("polygon", verts)]

    up_idx = int(np.argmin(verts[:, 1]))
    down_order = np.argsort(-verts[:, 1])
    right_idx = int(np.argmax(verts[:, 0]))
    left_idx = int(np.argmin(verts[:, 0]))

    for kind in category.appendages:
        idxs = []
        if kind == "head":
            r_head = rng.uniform(0.045, 0.065)
            anchor = verts[up_idx]
            direction = anchor - center
            direction = direction / (np.linalg.norm(direction) + 1e-9)
            c_head = anchor + direction * r_head * rng.uniform(0.75, 1.0)
            strokes.append(_circle_points(c_head, r_head, n=10, start=rng.uniform(0, 2 * np.pi)))
            idxs.append(len(strokes) - 1)
            eye_r = r_head * 0.3
            strokes.append(_circle_points(c_head, eye_r, n=6))
            idxs.append(len(strokes) - 1)
            fills.append(("disc", (c_head, r_head)))
        elif kind == "legs":
            k = 2 + (instance_seed + category.id) % 2
            for j in range(k):
                a = verts[down_order[j % n]]
                length = rng.uniform(0.06, 0.10)
                sway = rng.uniform(-0.03, 0.03)
                foot = a + np.array([sway, length])
                strokes.append(np.stack([a, foot]))
                idxs.append(len(strokes) - 1)
                fills.append(("line", (a, foot)))
        elif kind == "tail":
            a = verts[right_idx]
            length = rng.uniform(0.08, 0.13)
            curl = rng.uniform(0.03, 0.06)
            t = np.linspace(0.0, 1.0, 8)
            pts = np.stack(
                [a[0] + length * t, a[1] - curl * np.sin(t * np.pi)], axis=1
            )
            strokes.append(pts)
            idxs.append(len(strokes) - 1)
            fills.append(("path", pts))
        elif kind == "antennae":
            for sgn in (-1.0, 1.0):
                a = verts[up_idx]
                tip = a + np.array([sgn * rng.uniform(0.03, 0.06), -rng.uniform(0.07, 0.11)])
                strokes.append(np.stack([a, tip]))
                idxs.append(len(strokes) - 1)
                fills.append(("line", (a, tip)))
        elif kind == "fins":
            for vidx in (left_idx, right_idx):
                a = verts[vidx]
                direction = a - center
                direction = direction / (np.linalg.norm(direction) + 1e-9)
                tip = a + direction * rng.uniform(0.05, 0.09)
                off = np.array([-direction[1], direction[0]]) * rng.uniform(0.02, 0.04)
                tri = np.stack([a + off, tip, a - off, a + off])
                strokes.append(tri)
                idxs.append(len(strokes) - 1)
                fills.append(("polygon", tri[:3]))
        parts[kind] = idxs

    strokes, verts, fills = _cap_stroke_length(strokes, verts, fills)

    return GlyphInstance(
        category_id=category.id,
        instance_seed=instance_seed,
        strokes=strokes,
        parts=parts,
        body_vertices=verts,
        fills=fills,
        hue=(category.hue_base + rng.uniform(-0.06, 0.06)) % 1.0,
        texture=category.texture,
        texture_phase=rng.uniform(0.0, 1.0),
        texture_freq=rng.uniform(5.0, 9.0),
        noise_grid=rng.uniform(0.0, 1.0, size=(9, 9, 3)),
        blobs=[
            (
                (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)),
                (rng.uniform(0.05, 0.13), rng.uniform(0.05, 0.13)),
                rng.uniform(0.0, np.pi),
                (rng.uniform(0.0, 1.0), rng.uniform(0.15, 0.35), rng.uniform(0.45, 0.7)),
            )
            for _ in range(rng.integers(2, 5))
        ],
    )


# ---------------------------------------------------------------------------
# Renderers
# ---------------------------------------------------------------------------


def render_sketch(instance, side, jitter_seed=None):
    """Stroke-only rendering on white; jitter_seed simulates different drawers."""
    if side < 16:
        raise ValueError(f"side must be >= 16, got {side}")
    strokes = instance.strokes
    if jitter_seed is not None:
        rng = _rng(0x5E7C, instance.category_id, instance.instance_seed, jitter_seed)
        rot = rng.uniform(-0.07, 0.07)
        scale = rng.uniform(0.93, 1.07)
        shift = rng.uniform(-0.015, 0.015, size=2)
        ca, sa = np.cos(rot), np.sin(rot)
        mat = np.array([[ca, -sa], [sa, ca]]) * scale
        jittered = []
        for s in strokes:
            pts = (s - 0.5) @ mat.T + 0.5 + shift
            pts = pts + rng.normal(0.0, 0.004, size=pts.shape)
            jittered.append(pts)
        strokes = jittered
    raster = np.ones((side, side))
    _paint_strokes(raster, strokes, 0.0, side, width_px=1)
    return _quantize(raster)


def render_part_sketch(instance, part_name, side):
    """Render only the named part's strokes, recentered and rescaled to the frame.

    The part is scaled so its bounding box matches the extent a full glyph
    occupies, so part queries have full-sketch stroke scale.
    """
    box = instance.part_box_unit(part_name, pad=0.0)
    full = instance.glyph_box_unit()
    target = max(full.x2 - full.x1, full.y2 - full.y1)
    extent = max(box.x2 - box.x1, box.y2 - box.y1)
    scale = target / max(extent, 1e-6)
    cx, cy = 0.5 * (box.x1 + box.x2), 0.5 * (box.y1 + box.y2)
    raster = np.ones((side, side))
    moved = [
        (instance.strokes[i] - [cx, cy]) * scale + 0.5 for i in instance.parts[part_name]
    ]
    _paint_strokes(raster, moved, 0.0, side, width_px=1)
    return _quantize(raster)


def photo_transform(instance):
    """(scale, offset) mapping unit-frame geometry into the photo frame."""
    box = instance.glyph_box_unit()
    extent = max(box.x2 - box.x1, box.y2 - box.y1)
    scale = _PHOTO_FIT / max(extent, 1e-6)
    center = np.array([0.5 * (box.x1 + box.x2), 0.5 * (box.y1 + box.y2)])
    offset = 0.5 - center * scale
    return scale, offset


def _apply_transform(pts, scale, offset):
    return np.asarray(pts) * scale + offset


def render_photo(instance, side):
    """Filled, textured glyph on a cluttered background."""
    if side < 16:
        raise ValueError(f"side must be >= 16, got {side}")
    raster = _value_noise(instance.noise_grid, side, base=0.74, amplitude=0.12)
    for center, radii, angle, hsv in instance.blobs:
        alpha = _blob_alpha(center, radii, angle, softness=0.35, side=side)[:, :, None]
        color = np.array(_hsv_to_rgb(*hsv))
        raster = raster * (1 - alpha) + color[None, None, :] * alpha

    scale, offset = photo_transform(instance)
    base_rgb = np.array(_hsv_to_rgb(instance.hue, 0.62, 0.72))
    dark_rgb = np.array(_hsv_to_rgb(instance.hue, 0.72, 0.38))
    texture = _texture_field(instance, side)

    ink = max(1, int(round(0.018 * side)))
    for kind, params in instance.fills:
        if kind == "polygon":
            mask = _polygon_mask(_apply_transform(params, scale, offset), side)
            shade = base_rgb[None, None, :] * (0.80 + 0.40 * texture[:, :, None])
            raster = np.where(mask[:, :, None], shade, raster)
        elif kind == "disc":
            c, r = params
            mask = _disc_mask(_apply_transform(c, scale, offset), r * scale, side)
            raster = np.where(mask[:, :, None], dark_rgb[None, None, :], raster)
        elif kind in ("line", "path"):
            pts = params if kind == "path" else np.stack(params)
            px = _stroke_pixels(_apply_transform(pts, scale, offset), side, width_px=ink + 1)
            if len(px):
                raster[px[:, 1], px[:, 0]] = dark_rgb

    outline = [_apply_transform(s, scale, offset) for s in instance.strokes]
    out3 = np.ascontiguousarray(raster)
    for stroke in outline:
        px = _stroke_pixels(stroke, side, width_px=ink)
        if len(px):
            out3[px[:, 1], px[:, 0]] = dark_rgb * 0.5 + 0.06
    return _quantize(np.clip(out3, 1.0 / 255.0, 1.0))


def _texture_field(instance, side):
    """Scalar modulation field in [0, 1] evaluated in unit photo coordinates."""
    c = _pixel_centers(side)
    px = np.broadcast_to(c[None, :], (side, side))
    py = np.broadcast_to(c[:, None], (side, side))
    f = instance.texture_freq
    ph = instance.texture_phase
    if instance.texture == "solid":
        return np.full((side, side), 0.5)
    if instance.texture == "stripes":
        return (np.sin(2 * np.pi * (f * (0.6 * px + 0.4 * py) + ph)) > 0).astype(float)
    if instance.texture == "dots":
        gx = (px * f + ph) % 1.0
        gy = (py * f + ph) % 1.0
        return (((gx - 0.5) ** 2 + (gy - 0.5) ** 2) < 0.06).astype(float)
    # rings
    r = np.hypot(px - 0.5, py - 0.5)
    return (np.sin(2 * np.pi * (f * r + ph)) > 0).astype(float)


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


def gen_corpus(num_categories, instances_per_category, sketches_per_instance, seed,
               object_side=64):
    """Deterministic corpus of instance-paired sketches and photos."""
    if min(num_categories, instances_per_category, sketches_per_instance) < 1:
        raise ValueError("all corpus counts must be >= 1")
    cats = make_categories(num_categories, seed)
    corpus = Corpus(
        seed=seed,
        object_side=object_side,
        num_categories=num_categories,
        categories=cats,
        sketches_per_instance=sketches_per_instance,
    )
    for cat in cats:
        for iseed in range(instances_per_category):
            inst = make_instance(cat, iseed, seed)
            corpus.instances[(cat.id, iseed)] = inst
            corpus.photos[(cat.id, iseed)] = render_photo(inst, object_side)
            for v in range(sketches_per_instance):
                corpus.sketches[(cat.id, iseed, v)] = render_sketch(
                    inst, object_side, jitter_seed=v
                )
    return corpus


# ---------------------------------------------------------------------------
# Scene synthesis
# ---------------------------------------------------------------------------


def synth_canvas(corpus, n_range, canvas_side, seed, scene_id=0, max_pair_iou=0.3):
    """Tile 1..7 corpus photos onto a clutter canvas; record eval ground truth."""
    n_range = sorted(set(n_range))
    if not n_range or n_range[0] < 1 or n_range[-1] > 7:
        raise ValueError(f"n_range must lie within [1, 7], got {n_range}")
    rng = _rng(seed, 0x5CE2E, scene_id)
    n = int(rng.choice(n_range))
    keys = corpus.instance_keys()
    picks = [keys[int(rng.integers(0, len(keys)))] for _ in range(n)]

    grid = rng.uniform(0.0, 1.0, size=(17, 17, 3))
    canvas = _value_noise(grid, canvas_side, base=0.70, amplitude=0.10)
    n_blobs = int(rng.integers(3, 9))
    for _ in range(n_blobs):
        center = (rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
        radii = (rng.uniform(0.03, 0.09), rng.uniform(0.03, 0.09))
        angle = rng.uniform(0.0, np.pi)
        hsv = (rng.uniform(0.0, 1.0), rng.uniform(0.1, 0.3), rng.uniform(0.4, 0.75))
        alpha = _blob_alpha(center, radii, angle, softness=0.4, side=canvas_side)[:, :, None]
        canvas = canvas * (1 - alpha) + np.array(_hsv_to_rgb(*hsv))[None, None, :] * alpha

    sides = [corpus.object_side] * n
    placements = tile_layout(n, canvas_side, sides, max_pair_iou, rng)
    entries = []
    for placement, key in zip(placements, picks):
        b = placement.box
        # snap to integer pixels for crisp composites and exact ground truth
        x1, y1 = int(round(b.x1)), int(round(b.y1))
        side = max(8, int(round(b.x2 - b.x1)))
        x1 = min(x1, canvas_side - side)
        y1 = min(y1, canvas_side - side)
        tile = resize(corpus.photos[key], side)
        canvas[y1 : y1 + side, x1 : x1 + side] = tile
        entries.append((Box(float(x1), float(y1), float(x1 + side), float(y1 + side)), key[0], key[1]))

    y = np.zeros(corpus.num_categories + 1, dtype=np.int64)
    y[0] = 1
    for _, cid, _ in entries:
        y[cid + 1] = 1
    canvas = _quantize(np.clip(canvas, 1.0 / 255.0, 1.0))
    return SceneCanvas(photo=canvas, entries=entries, y=y, scene_id=scene_id)


def occlude(canvas, fraction, seed=0):
    """Zero a random sub-rectangle of fraction x area inside every ground-truth box."""
    out = SceneCanvas(
        photo=canvas.photo.copy(),
        entries=list(canvas.entries),
        y=canvas.y.copy(),
        scene_id=canvas.scene_id,
    )
    if fraction <= 0.0:
        return out
    rng = _rng(seed, 0x0CC1, canvas.scene_id)
    root = np.sqrt(fraction)
    for box, _, _ in canvas.entries:
        bw = box.x2 - box.x1
        bh = box.y2 - box.y1
        mw = max(1, int(round(bw * root)))
        mh = max(1, int(round(bh * root)))
        x = int(box.x1) + int(rng.integers(0, max(1, int(bw) - mw + 1)))
        y = int(box.y1) + int(rng.integers(0, max(1, int(bh) - mh + 1)))
        out.photo[y : y + mh, x : x + mw] = 0.0
    return out


# ---------------------------------------------------------------------------
# On-disk format
# ---------------------------------------------------------------------------


def save_png(raster, path):
    arr = np.round(np.clip(raster, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_png(path):
    arr = np.asarray(Image.open(path))
    return arr.astype(np.float64) / 255.0


def write_objects_split(corpus, categories, out_dir):
    """Write photo/sketch PNGs plus a JSONL manifest for one split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for cid, iseed in corpus.instance_keys(categories):
        inst = corpus.instances[(cid, iseed)]
        stem = f"cat{cid:02d}_inst{iseed:03d}"
        photo_name = f"{stem}_photo.png"
        save_png(corpus.photos[(cid, iseed)], out / photo_name)
        sketch_names = []
        for v in range(corpus.sketches_per_instance):
            name = f"{stem}_s{v}.png"
            save_png(corpus.sketches[(cid, iseed, v)], out / name)
            sketch_names.append(name)
        part_boxes = {
            p: [round(float(c), 6) for c in inst.part_box_unit(p).coords()]
            for p in inst.part_names()
        }
        lines.append(
            json.dumps(
                {
                    "category": cid,
                    "instance_seed": iseed,
                    "photo": photo_name,
                    "sketches": sketch_names,
                    "parts": inst.part_names(),
                    "part_boxes": part_boxes,
                },
                sort_keys=True,
            )
        )
    (out / "items.jsonl").write_text("\n".join(lines) + "\n")


def write_scene_split(scenes_iter, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for scene in scenes_iter:
        name = f"scene_{scene.scene_id:05d}.png"
        save_png(scene.photo, out / name)
        lines.append(
            json.dumps(
                {
                    "id": scene.scene_id,
                    "image": name,
                    "n": len(scene.entries),
                    "entries": [
                        {
                            "box": [float(c) for c in box.coords()],
                            "category": cid,
                            "instance_seed": iseed,
                        }
                        for box, cid, iseed in scene.entries
                    ],
                    "y": scene.y.tolist(),
                },
                sort_keys=True,
            )
        )
    (out / "items.jsonl").write_text("\n".join(lines) + "\n")
