"""Fixation/annotation data model, file ingestion and gaze preprocessing.

Fixation logs are CSV files with the header::

    image_id,subject_id,condition,fix_index,x_px,y_px,onset_ms,duration_ms

Times are integer milliseconds on disk and seconds in memory.  Annotations
are JSON objects (one per line, or a top-level array) of the form
``{"image_id", "width", "height", "objects": [{"class", "xmin", ...}]}``.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateRecordError,
    ParseError,
    StateError,
    ValidationError,
)

FIXATION_HEADER = (
    "image_id", "subject_id", "condition", "fix_index",
    "x_px", "y_px", "onset_ms", "duration_ms",
)

ANIMAL_CLASSES = frozenset({"bird", "cat", "cow", "dog", "horse", "sheep"})


class Condition(str, enum.Enum):
    FREE_VIEWING = "fv"
    VISUAL_SEARCH = "vs"

    @classmethod
    def parse(cls, text):
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown condition {text!r} (expected 'fv' or 'vs')") from None


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float
    onset: float      # seconds from image display
    duration: float   # seconds
    index: int = 0    # raw recording order (fix_index column)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValidationError(f"fixation duration must be > 0, got {self.duration}")
        if not self.onset >= 0:
            raise ValidationError(f"fixation onset must be >= 0, got {self.onset}")

    def is_valid(self, width, height):
        """True when (x, y) is finite and lies on the image."""
        return (
            math.isfinite(self.x) and math.isfinite(self.y)
            and 0 <= self.x < width and 0 <= self.y < height
        )


@dataclass(frozen=True)
class ScanPath:
    image_id: str
    subject_id: str
    condition: Condition
    fixations: tuple[Fixation, ...] = ()
    preprocessed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        onsets = [f.onset for f in self.fixations]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ValidationError(
                f"fixation onsets must be strictly increasing in scan path "
                f"{self.key}"
            )

    @property
    def key(self):
        return (self.image_id, self.subject_id, self.condition.value)

    @property
    def is_empty(self):
        return not self.fixations

    def __len__(self):
        return len(self.fixations)


@dataclass(frozen=True)
class BoundingBox:
    class_label: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x, y):
        # edge-inclusive membership
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: int
    height: int
    objects: tuple[BoundingBox, ...] = ()
    target_classes: frozenset = ANIMAL_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "target_classes", frozenset(self.target_classes))
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image {self.image_id}: non-positive size")
        for box in self.objects:
            if not (box.xmin < box.xmax and box.ymin < box.ymax):
                raise ValidationError(
                    f"image {self.image_id}: degenerate box for {box.class_label!r} "
                    f"({box.xmin},{box.ymin},{box.xmax},{box.ymax})"
                )
            if box.xmin < 0 or box.ymin < 0 or box.xmax > self.width or box.ymax > self.height:
                raise ValidationError(
                    f"image {self.image_id}: box for {box.class_label!r} exceeds "
                    f"image bounds {self.width}x{self.height}"
                )

    @property
    def targets(self):
        return tuple(b for b in self.objects if b.class_label in self.target_classes)

    @property
    def target_count(self):
        return len(self.targets)

    @property
    def target_labels(self):
        return frozenset(b.class_label for b in self.targets)


@dataclass(frozen=True)
class Dataset:
    annotations: dict = field(default_factory=dict)
    scanpaths: tuple[ScanPath, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scanpaths", tuple(self.scanpaths))
        missing = sorted({sp.image_id for sp in self.scanpaths} - set(self.annotations))
        if missing:
            raise ValidationError(
                "scan paths reference unannotated images: " + ", ".join(missing[:20])
            )

    def paths_for(self, condition=None, include_empty=False):
        return [
            sp for sp in self.scanpaths
            if (condition is None or sp.condition == condition)
            and (include_empty or not sp.is_empty)
        ]

    def preprocessed(self):
        """Preprocess every path; empty results are kept (and flagged by ``is_empty``)."""
        return Dataset(
            self.annotations,
            [sp if sp.preprocessed else preprocess(sp, self.annotations[sp.image_id])
             for sp in self.scanpaths],
        )


def preprocess(sp: ScanPath, ann: ImageAnnotation) -> ScanPath:
    """Drop the first recorded fixation and every off-image fixation.

    A path that ends up with no fixations is returned empty; check
    ``ScanPath.is_empty`` before computing per-path statistics.
    """
    if sp.preprocessed:
        raise StateError(f"scan path {sp.key} is already preprocessed")
    kept = [f for f in sp.fixations[1:] if f.is_valid(ann.width, ann.height)]
    return replace(sp, fixations=tuple(kept), preprocessed=True)


def _parse_number(text, name, line, integer=False):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric {name} {text!r}", line) from None
    if integer:
        if not value.is_integer():
            raise ParseError(f"{name} must be an integer, got {text!r}", line)
        return int(value)
    return value


def load_fixation_log(path) -> list[ScanPath]:
    """Read a fixation CSV into raw (not preprocessed) scan paths.

    Paths come back in order of first appearance in the file; fixations
    within a path are sorted by onset.
    """
    groups: dict[tuple, list[Fixation]] = {}
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(h.strip() for h in header) != FIXATION_HEADER:
            raise ParseError(f"bad header, expected {','.join(FIXATION_HEADER)}", 1)
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(FIXATION_HEADER):
                raise ParseError(
                    f"expected {len(FIXATION_HEADER)} columns, got {len(row)}", line
                )
            image_id, subject_id, cond = (c.strip() for c in row[:3])
            try:
                condition = Condition.parse(cond)
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            fix_index = _parse_number(row[3], "fix_index", line, integer=True)
            x = _parse_number(row[4], "x_px", line)
            y = _parse_number(row[5], "y_px", line)
            onset_ms = _parse_number(row[6], "onset_ms", line)
            duration_ms = _parse_number(row[7], "duration_ms", line)

            record = (image_id, subject_id, condition, fix_index)
            if record in seen:
                raise DuplicateRecordError(
                    f"line {line}: duplicate record (image={image_id}, "
                    f"subject={subject_id}, condition={condition.value}, "
                    f"fix_index={fix_index})"
                )
            seen.add(record)
            try:
                fix = Fixation(x, y, onset_ms / 1000.0, duration_ms / 1000.0, fix_index)
            except ValidationError as exc:
                raise ParseError(str(exc), line) from None
            groups.setdefault(record[:3], []).append(fix)

    paths = []
    for (image_id, subject_id, condition), fixations in groups.items():
        fixations.sort(key=lambda f: (f.onset, f.index))
        paths.append(ScanPath(image_id, subject_id, condition, tuple(fixations)))
    return paths


def _format_number(value):
    if math.isfinite(value) and float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_fixation_log(paths: Iterable[ScanPath], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIXATION_HEADER)
        for sp in paths:
            for fix in sp.fixations:
                writer.writerow([
                    sp.image_id, sp.subject_id, sp.condition.value, fix.index,
                    _format_number(fix.x), _format_number(fix.y),
                    _format_number(round(fix.onset * 1000.0, 6)),
                    _format_number(round(fix.duration * 1000.0, 6)),
                ])


def _annotation_from_record(rec, target_classes):
    try:
        image_id = str(rec["image_id"])
        objects = [
            BoundingBox(str(o["class"]), o["xmin"], o["ymin"], o["xmax"], o["ymax"])
            for o in rec.get("objects", [])
        ]
        return ImageAnnotation(
            image_id, int(rec["width"]), int(rec["height"]), objects, target_classes
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(
            f"annotation record {rec.get('image_id', '?') if isinstance(rec, dict) else '?'}: "
            f"missing or malformed field {exc}"
        ) from None


def load_annotations(path, target_classes=ANIMAL_CLASSES) -> dict[str, ImageAnnotation]:
    """Read JSON-lines or a top-level JSON array of image annotations."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            records = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    else:
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None

    annotations = {}
    for rec in records:
        ann = _annotation_from_record(rec, target_classes)
        if ann.image_id in annotations:
            raise DuplicateRecordError(f"duplicate annotation for image {ann.image_id}")
        annotations[ann.image_id] = ann
    return annotations


def annotation_to_record(ann: ImageAnnotation) -> dict:
    return {
        "image_id": ann.image_id,
        "width": ann.width,
        "height": ann.height,
        "objects": [
            {"class": b.class_label, "xmin": b.xmin, "ymin": b.ymin,
             "xmax": b.xmax, "ymax": b.ymax}
            for b in ann.objects
        ],
    }


def write_annotations(annotations, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations.values():
            fh.write(json.dumps(annotation_to_record(ann), sort_keys=True) + "\n")


def load_dataset(fixations_path, annotations_path, target_classes=ANIMAL_CLASSES) -> Dataset:
    return Dataset(
        load_annotations(annotations_path, target_classes),
        load_fixation_log(fixations_path),
    )


def write_dataset(dataset: Dataset, fixations_path, annotations_path):
    write_fixation_log(dataset.scanpaths, fixations_path)
    write_annotations(dataset.annotations, annotations_path)
