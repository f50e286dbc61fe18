"""Dataset manifests, annotations at three supervision tiers, detection dumps.

Both persisted formats are line-delimited JSON with a header record:

    manifest.jsonl    {"format_version":1,"name":...}
                      {"image_id","image_path","width","height","tier",
                       "chars":[[x0,y0,x1,y1],...],"words":[[x0,y0,x1,y1],...]}
    detections.jsonl  {"format_version":1}
                      {"image_id","boxes":[[x0,y0,x1,y1,score],...]}
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .errors import FormatError, ValidationError, VersionError
from .geometry import BBox

logger = logging.getLogger(__name__)

MANIFEST_FORMAT_VERSION = 1
DETECTIONS_FORMAT_VERSION = 1

TIERS = ("full", "weak", "none")


@dataclass(frozen=True)
class CharAnnotation:
    """One annotated character box; the label is provenance only."""

    box: BBox
    label: str | None = None

    def __post_init__(self):
        if self.label is not None and len(self.label) != 1:
            raise ValidationError(f"character label must be a single character: {self.label!r}")


@dataclass(frozen=True)
class WeakAnnotation:
    """Word/text-line level boxes guiding weakly supervised mining."""

    boxes: tuple[BBox, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class CharCandidate:
    """Detector-proposed character box with its text confidence."""

    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"candidate score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    image_path: str
    width: float
    height: float
    tier: str
    char_annotations: tuple[CharAnnotation, ...] = ()
    weak_annotations: WeakAnnotation = WeakAnnotation()
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "char_annotations", tuple(self.char_annotations))
        if self.tier not in TIERS:
            raise ValidationError(f"unknown tier {self.tier!r} for image {self.image_id!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"non-positive image extent for {self.image_id!r}")
        # Tier gates which annotations may be present. Full-tier records may
        # additionally carry word boxes (held-out test sets need both levels).
        if self.tier == "none" and (self.char_annotations or self.weak_annotations.boxes):
            raise ValidationError(f"tier=none record {self.image_id!r} carries annotations")
        if self.tier == "weak" and self.char_annotations:
            raise ValidationError(f"tier=weak record {self.image_id!r} carries char boxes")
        for ann in self.char_annotations:
            self._check_inside(ann.box)
        for box in self.weak_annotations.boxes:
            self._check_inside(box)

    def _check_inside(self, box: BBox):
        if box.x_min < 0 or box.y_min < 0 or box.x_max > self.width or box.y_max > self.height:
            raise ValidationError(
                f"box {box.to_tuple()} outside image {self.image_id!r} "
                f"({self.width}x{self.height})"
            )


@dataclass(frozen=True)
class LoadReport:
    """What was repaired while loading a manifest."""

    clipped_boxes: int = 0
    dropped_boxes: int = 0


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ImageRecord, ...]
    name: str = "dataset"
    version: str = "1"
    load_report: LoadReport = LoadReport()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise ValidationError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> set[str]:
        return {rec.image_id for rec in self.records}

    def by_id(self, image_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.image_id == image_id:
                return rec
        raise KeyError(image_id)


def _box_to_list(box: BBox) -> list[float]:
    return [box.x_min, box.y_min, box.x_max, box.y_max]


def _clip_box(raw, width, height):
    """Clip a raw 4-tuple to the image; None if degenerate after clipping."""
    x0, y0, x1, y1 = (float(v) for v in raw)
    cx0, cy0 = max(0.0, min(x0, width)), max(0.0, min(y0, height))
    cx1, cy1 = max(0.0, min(x1, width)), max(0.0, min(y1, height))
    clipped = (cx0, cy0, cx1, cy1) != (x0, y0, x1, y1)
    if cx0 >= cx1 or cy0 >= cy1:
        return None, clipped
    return BBox(cx0, cy0, cx1, cy1), clipped


def save_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "format_version": MANIFEST_FORMAT_VERSION,
            "name": manifest.name,
            "version": manifest.version,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in manifest.records:
            row = {
                "image_id": rec.image_id,
                "image_path": rec.image_path,
                "width": rec.width,
                "height": rec.height,
                "tier": rec.tier,
                "chars": [
                    _box_to_list(a.box) + ([a.label] if a.label is not None else [])
                    for a in rec.char_annotations
                ],
                "words": [_box_to_list(b) for b in rec.weak_annotations.boxes],
            }
            if rec.meta:
                row["meta"] = dict(rec.meta)
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def load_manifest(path) -> DatasetManifest:
    """Load a manifest, clipping out-of-bounds boxes and dropping degenerate ones.

    Repairs are counted in the returned manifest's ``load_report``.
    """
    path = Path(path)
    clipped = 0
    dropped = 0
    records = []
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError(f"{path}: empty manifest file", line_no=1)
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header: {exc}", line_no=1) from exc
        if header.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise VersionError(
                f"{path}: manifest format_version {header.get('format_version')!r}, "
                f"expected {MANIFEST_FORMAT_VERSION}"
            )
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: bad record: {exc}", line_no=line_no) from exc
            try:
                width = float(row["width"])
                height = float(row["height"])
                chars = []
                for raw in row.get("chars", []):
                    label = raw[4] if len(raw) > 4 else None
                    box, was_clipped = _clip_box(raw[:4], width, height)
                    clipped += was_clipped
                    if box is None:
                        dropped += 1
                        continue
                    chars.append(CharAnnotation(box, label))
                words = []
                for raw in row.get("words", []):
                    box, was_clipped = _clip_box(raw[:4], width, height)
                    clipped += was_clipped
                    if box is None:
                        dropped += 1
                        continue
                    words.append(box)
                records.append(
                    ImageRecord(
                        image_id=row["image_id"],
                        image_path=row["image_path"],
                        width=width,
                        height=height,
                        tier=row["tier"],
                        char_annotations=tuple(chars),
                        weak_annotations=WeakAnnotation(tuple(words)),
                        meta=row.get("meta", {}),
                    )
                )
            except KeyError as exc:
                raise FormatError(f"{path}: missing field {exc}", line_no=line_no) from exc
    if clipped or dropped:
        logger.warning(
            "%s: clipped %d out-of-bounds boxes, dropped %d degenerate ones",
            path, clipped, dropped,
        )
    return DatasetManifest(
        records=tuple(records),
        name=header.get("name", path.stem),
        version=str(header.get("version", "1")),
        load_report=LoadReport(clipped_boxes=clipped, dropped_boxes=dropped),
    )


def save_detections(detections: Mapping[str, Sequence[CharCandidate]], path) -> Path:
    """Persist per-image candidates; scores round-trip at full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format_version": DETECTIONS_FORMAT_VERSION}) + "\n")
        for image_id, cands in detections.items():
            row = {
                "image_id": image_id,
                "boxes": [_box_to_list(c.box) + [c.score] for c in cands],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def load_detections(path) -> dict[str, list[CharCandidate]]:
    path = Path(path)
    out: dict[str, list[CharCandidate]] = {}
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header: {exc}", line_no=1) from exc
        if header.get("format_version") != DETECTIONS_FORMAT_VERSION:
            raise VersionError(
                f"{path}: detections format_version {header.get('format_version')!r}, "
                f"expected {DETECTIONS_FORMAT_VERSION}"
            )
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                cands = [
                    CharCandidate(BBox(b[0], b[1], b[2], b[3]), b[4]) for b in row["boxes"]
                ]
            except (json.JSONDecodeError, KeyError, IndexError) as exc:
                raise FormatError(f"{path}: bad record: {exc}", line_no=line_no) from exc
            if row["image_id"] in out:
                raise ValidationError(f"{path}: duplicate image_id {row['image_id']!r}")
            out[row["image_id"]] = cands
    return out


def with_records(manifest: DatasetManifest, records, name=None) -> DatasetManifest:
    return replace(
        manifest,
        records=tuple(records),
        name=manifest.name if name is None else name,
        load_report=LoadReport(),
    )
