"""Deterministic synthetic scene-text generator with exact box ground truth.

Characters are procedural blocky glyphs: random subsets of axis-aligned
segments, always including one full-width horizontal and one full-height
vertical bar so the glyph fills its cell and the box stays tight. Words
share a baseline and height; the word box is the union of its character
cells. Clutter adds non-text distractor strokes (diagonals, crosses,
rings) whose count scales with the clutter level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    CharAnnotation,
    DatasetManifest,
    ImageRecord,
    WeakAnnotation,
    save_manifest,
)
from .errors import GenerationError, ValidationError
from .geometry import BBox
from .imgio import save_image

LAYOUT_ATTEMPTS = 80


@dataclass(frozen=True)
class SceneSpec:
    image_size: int = 96
    words_per_image: tuple[int, int] = (2, 4)
    chars_per_word: tuple[int, int] = (2, 5)
    font_height: tuple[int, int] = (10, 22)
    clutter: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("words_per_image", "chars_per_word", "font_height"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValidationError(f"empty range {name}={lo, hi}")
        if not 0.0 <= self.clutter <= 1.0:
            raise ValidationError(f"clutter {self.clutter} outside [0, 1]")
        if self.image_size < 32:
            raise ValidationError("image_size must be >= 32")

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "words_per_image": list(self.words_per_image),
            "chars_per_word": list(self.chars_per_word),
            "font_height": list(self.font_height),
            "clutter": self.clutter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            image_size=int(d.get("image_size", 96)),
            words_per_image=tuple(d.get("words_per_image", (2, 4))),
            chars_per_word=tuple(d.get("chars_per_word", (2, 5))),
            font_height=tuple(d.get("font_height", (10, 22))),
            clutter=float(d.get("clutter", 0.5)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class Scene:
    image: np.ndarray                 # (H, W, 3) uint8
    char_boxes: tuple[BBox, ...]
    word_boxes: tuple[BBox, ...]


def _fill(canvas, x0, y0, x1, y1, value):
    canvas[max(0, y0):y1, max(0, x0):x1] = value


def _draw_glyph(canvas, x0, y0, w, h, ink, rng):
    """Random segment glyph filling its (w, h) cell edge to edge."""
    t = max(1, round(h / 5))
    # full-width horizontals at top / middle / bottom
    h_bars = {
        "top": (0, t),
        "mid": ((h - t) // 2, (h - t) // 2 + t),
        "bot": (h - t, h),
    }
    # verticals at left / center / right; full or half height
    v_xs = {"left": 0, "center": (w - t) // 2, "right": w - t}
    chosen_h = list(rng.choice(["top", "mid", "bot"],
                               size=rng.integers(1, 3), replace=False))
    chosen_v = str(rng.choice(["left", "center", "right"]))
    for name in chosen_h:
        ya, yb = h_bars[name]
        _fill(canvas, x0, y0 + ya, x0 + w, y0 + yb, ink)
    vx = v_xs[chosen_v]
    _fill(canvas, x0 + vx, y0, x0 + vx + t, y0 + h, ink)
    # optional extra half-height verticals for variety
    for _ in range(rng.integers(0, 3)):
        name = str(rng.choice(["left", "center", "right"]))
        half = str(rng.choice(["upper", "lower"]))
        vx = v_xs[name]
        if half == "upper":
            _fill(canvas, x0 + vx, y0, x0 + vx + t, y0 + h // 2, ink)
        else:
            _fill(canvas, x0 + vx, y0 + h // 2, x0 + vx + t, y0 + h, ink)


def _draw_diagonal(canvas, x0, y0, w, h, ink, t, anti=False):
    for row in range(h):
        frac = row / max(1, h - 1)
        cx = (1.0 - frac) * (w - 1) if anti else frac * (w - 1)
        a = int(round(cx - t / 2))
        canvas[y0 + row, max(0, x0 + a):x0 + a + t] = ink


def _draw_ring(canvas, x0, y0, w, h, ink, t):
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = (w - 1) / 2, (h - 1) / 2
    r = min(w, h) / 2 - 0.5
    dist = np.sqrt(((xx - cx) / max(cx, 1e-6)) ** 2 + ((yy - cy) / max(cy, 1e-6)) ** 2)
    mask = np.abs(dist - 1.0) < (t / max(r, 1.0))
    canvas[y0:y0 + h, x0:x0 + w][mask] = ink


def _draw_distractor(canvas, x0, y0, w, h, ink, rng):
    t = max(1, round(min(w, h) / 5))
    kind = str(rng.choice(["diag", "anti", "cross", "ring"]))
    if kind == "diag":
        _draw_diagonal(canvas, x0, y0, w, h, ink, t)
    elif kind == "anti":
        _draw_diagonal(canvas, x0, y0, w, h, ink, t, anti=True)
    elif kind == "cross":
        _draw_diagonal(canvas, x0, y0, w, h, ink, t)
        _draw_diagonal(canvas, x0, y0, w, h, ink, t, anti=True)
    else:
        _draw_ring(canvas, x0, y0, w, h, ink, t)


def _overlaps_padded(x0, y0, x1, y1, rects, pad):
    for (a0, b0, a1, b1) in rects:
        if x0 < a1 + pad and x1 > a0 - pad and y0 < b1 + pad and y1 > b0 - pad:
            return True
    return False


def _ink_level(bg_level, rng):
    contrast = rng.uniform(55, 145)
    if bg_level > 127:
        return max(0.0, bg_level - contrast)
    return min(255.0, bg_level + contrast)


def render_scene(spec: SceneSpec, index: int) -> Scene:
    """Deterministically render scene `index` of the stream defined by `spec`."""
    rng = np.random.default_rng([spec.seed, index])
    size = spec.image_size
    bg_level = rng.uniform(45, 205)
    gx, gy = rng.uniform(-25, 25, size=2)
    col = np.arange(size) / size
    canvas = bg_level + gx * col[None, :] + gy * col[:, None]

    n_words = int(rng.integers(spec.words_per_image[0], spec.words_per_image[1] + 1))
    word_rects: list[tuple[int, int, int, int]] = []
    char_cells: list[tuple[int, int, int, int]] = []
    word_boxes: list[BBox] = []
    char_boxes: list[BBox] = []
    attempts_left = LAYOUT_ATTEMPTS * n_words
    placed = 0
    while placed < n_words:
        if attempts_left <= 0:
            raise GenerationError(
                f"could not place {n_words} words in a {size}px scene "
                f"(seed={spec.seed}, index={index})"
            )
        attempts_left -= 1
        n_chars = int(rng.integers(spec.chars_per_word[0], spec.chars_per_word[1] + 1))
        h = int(rng.integers(spec.font_height[0], spec.font_height[1] + 1))
        widths = [max(3, round(h * rng.uniform(0.5, 0.8))) for _ in range(n_chars)]
        gaps = [max(1, round(h * rng.uniform(0.12, 0.28))) for _ in range(n_chars - 1)]
        total_w = sum(widths) + sum(gaps)
        if total_w > size - 4 or h > size - 4:
            continue
        x0 = int(rng.integers(2, size - total_w - 1))
        y0 = int(rng.integers(2, size - h - 1))
        pad = max(3, h // 2)
        if _overlaps_padded(x0, y0, x0 + total_w, y0 + h, word_rects, pad):
            continue
        ink = _ink_level(bg_level, rng)
        cx = x0
        cells = []
        for k, w in enumerate(widths):
            _draw_glyph(canvas, cx, y0, w, h, ink, rng)
            cells.append((cx, y0, cx + w, y0 + h))
            cx += w + (gaps[k] if k < len(gaps) else 0)
        word_rects.append((x0, y0, x0 + total_w, y0 + h))
        word_boxes.append(BBox(x0, y0, x0 + total_w, y0 + h))
        char_cells.extend(cells)
        char_boxes.extend(BBox(*c) for c in cells)
        placed += 1

    max_distract = round(6 * spec.clutter)
    n_distract = int(rng.integers(0, max_distract + 1)) if max_distract > 0 else 0
    for _ in range(n_distract):
        for _attempt in range(30):
            dh = int(rng.integers(spec.font_height[0], spec.font_height[1] + 4))
            dw = max(4, round(dh * rng.uniform(0.5, 1.1)))
            if dw >= size - 4 or dh >= size - 4:
                continue
            dx = int(rng.integers(2, size - dw - 1))
            dy = int(rng.integers(2, size - dh - 1))
            if _overlaps_padded(dx, dy, dx + dw, dy + dh, word_rects, 3):
                continue
            _draw_distractor(canvas, dx, dy, dw, dh, _ink_level(bg_level, rng), rng)
            break

    sigma = 1.5 + 6.0 * spec.clutter * rng.uniform(0.5, 1.0)
    canvas = canvas + rng.normal(0.0, sigma, size=canvas.shape)
    gray = np.clip(canvas, 0, 255).astype(np.uint8)
    image = np.stack([gray, gray, gray], axis=-1)
    return Scene(image, tuple(char_boxes), tuple(word_boxes))


def _record(image_id, image_path, size, tier, chars=(), words=()):
    return ImageRecord(
        image_id=image_id,
        image_path=str(image_path),
        width=float(size),
        height=float(size),
        tier=tier,
        char_annotations=tuple(CharAnnotation(b) for b in chars),
        weak_annotations=WeakAnnotation(tuple(words)),
    )


def make_benchmark(spec: SceneSpec, n_images: int,
                   fractions: tuple[float, float, float],
                   out_dir) -> dict[str, DatasetManifest]:
    """Render a benchmark split into full / weak / none / held-out test sets.

    Fractions give the full, weak, and unannotated shares; the remainder is
    the test set, which keeps both character and word boxes for evaluation.
    Image sets are disjoint. Manifests and PNGs are written under out_dir.
    """
    if sum(fractions) > 1.0 + 1e-9:
        raise ValidationError(f"fractions {fractions} sum to more than 1")
    counts = [math.floor(n_images * f) for f in fractions]
    n_test = n_images - sum(counts)
    for frac, count in zip(fractions, counts):
        if frac > 0 and count == 0:
            raise ValidationError(
                f"n_images={n_images} too small for fractions {fractions}"
            )
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    tier_of: list[str] = (["full"] * counts[0] + ["weak"] * counts[1]
                          + ["none"] * counts[2] + ["test"] * n_test)
    records: dict[str, list[ImageRecord]] = {"full": [], "weak": [], "none": [], "test": []}
    for index, split in enumerate(tier_of):
        scene = render_scene(spec, index)
        image_id = f"scene_{index:05d}"
        path = image_dir / f"{image_id}.png"
        save_image(scene.image, path)
        if split == "full":
            rec = _record(image_id, path, spec.image_size, "full", chars=scene.char_boxes)
        elif split == "weak":
            rec = _record(image_id, path, spec.image_size, "weak", words=scene.word_boxes)
        elif split == "none":
            rec = _record(image_id, path, spec.image_size, "none")
        else:
            rec = _record(image_id, path, spec.image_size, "full",
                          chars=scene.char_boxes, words=scene.word_boxes)
        records[split].append(rec)

    manifests = {}
    for split, recs in records.items():
        manifest = DatasetManifest(tuple(recs), name=f"synth_{split}",
                                   version=str(spec.seed))
        save_manifest(manifest, out_dir / f"{split}.jsonl")
        manifests[split] = manifest
    return manifests
