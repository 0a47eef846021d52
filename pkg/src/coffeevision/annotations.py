"""Annotation and prediction file I/O.

Canonical on-disk formats (UTF-8, LF line endings):

* label file ``<image_id>.txt``      -- one box per line: ``idx cx cy w h``
* prediction file ``<image_id>.txt`` -- one entry per line: ``idx conf cx cy w h``
* names file ``names.txt``           -- one category name per line, index = line number

All geometry is normalized by image dimensions (center / size form). Reals are
serialized with exactly 6 decimal places, so parse(serialize(x)) reproduces x
to 1e-6. Values that stray outside [0, 1] by at most 1e-6 are clamped on load;
anything worse is rejected.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from urllib.parse import unquote, urlsplit

from .errors import CoffeeVisionError

# Tolerated float dust outside [0, 1] before a value is an error.
EDGE_TOLERANCE = 1e-6

DEFAULT_STAGE_NAMES = ["green", "green-yellow", "cherry", "raisin", "dry"]


class MalformedLine(CoffeeVisionError):
    """A line has the wrong field count or a non-numeric field."""

    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail or 'malformed'}")


class OutOfRange(CoffeeVisionError):
    """A coordinate is outside [0, 1] by more than the tolerance."""

    def __init__(self, where, detail: str = ""):
        self.where = where
        super().__init__(f"{where}: {detail or 'value out of range'}")


class UnsupportedSchema(CoffeeVisionError):
    """The Label Studio export does not have the expected JSON-MIN shape."""


class UnknownLabel(CoffeeVisionError):
    """A label string is missing from the supplied names list."""


@dataclass(frozen=True)
class NormalizedBox:
    """One bounding box: category index plus normalized center/size."""

    category_index: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.category_index < 0:
            raise ValueError(f"negative category index {self.category_index}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"non-positive box size {self.w}x{self.h}")
        for v in (self.cx, self.cy, self.w, self.h):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"coordinate {v} outside [0, 1]")
        for lo, hi in ((self.cx - self.w / 2, self.cx + self.w / 2),
                       (self.cy - self.h / 2, self.cy + self.h / 2)):
            if lo < -EDGE_TOLERANCE or hi > 1.0 + EDGE_TOLERANCE:
                raise ValueError(f"box edge [{lo}, {hi}] outside [0, 1]")

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) in normalized coordinates."""
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class Prediction:
    """A detector output: a box plus its confidence."""

    box: NormalizedBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class LabelFile:
    """All ground-truth boxes of one image."""

    image_id: str
    boxes: list[NormalizedBox] = field(default_factory=list)
    category_names: list[str] | None = None

    def __post_init__(self):
        if self.category_names is not None:
            for b in self.boxes:
                if b.category_index >= len(self.category_names):
                    raise ValueError(
                        f"category {b.category_index} has no name "
                        f"(only {len(self.category_names)} names)")


@dataclass
class PredictionFile:
    """All detector outputs for one image."""

    image_id: str
    entries: list[Prediction] = field(default_factory=list)


def _clamp_unit(v: float, where, what: str) -> float:
    if v < -EDGE_TOLERANCE or v > 1.0 + EDGE_TOLERANCE:
        raise OutOfRange(where, f"{what}={v!r} outside [0, 1]")
    return min(max(v, 0.0), 1.0)


def _sanitize_box(category: int, cx: float, cy: float, w: float, h: float,
                  where) -> NormalizedBox:
    """Validate raw values against the box invariants, clamping float dust."""
    if w <= 0 or h <= 0:
        raise OutOfRange(where, f"non-positive size {w}x{h}")
    for c, s, axis in ((cx, w, "x"), (cy, h, "y")):
        if c - s / 2 < -EDGE_TOLERANCE or c + s / 2 > 1.0 + EDGE_TOLERANCE:
            raise OutOfRange(where, f"box exceeds image bounds on {axis}")
    return NormalizedBox(
        category_index=category,
        cx=_clamp_unit(cx, where, "cx"),
        cy=_clamp_unit(cy, where, "cy"),
        w=min(_clamp_unit(w, where, "w"), 1.0),
        h=min(_clamp_unit(h, where, "h"), 1.0),
    )


def _parse_fields(line: str, line_no: int, expected: int) -> list[float]:
    parts = line.split()
    if len(parts) != expected:
        raise MalformedLine(line_no, f"expected {expected} fields, got {len(parts)}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise MalformedLine(line_no, f"non-numeric field in {line!r}") from None
    if values[0] < 0 or values[0] != int(values[0]):
        raise MalformedLine(line_no, f"category index {parts[0]!r} is not a non-negative integer")
    return values


def parse_yolo_label(text: str, image_id: str = "",
                     category_names: list[str] | None = None) -> LabelFile:
    """Parse YOLO label text: one ``idx cx cy w h`` line per box."""
    boxes = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        v = _parse_fields(line, line_no, 5)
        boxes.append(_sanitize_box(int(v[0]), v[1], v[2], v[3], v[4], f"line {line_no}"))
    return LabelFile(image_id=image_id, boxes=boxes, category_names=category_names)


def serialize_yolo_label(label: LabelFile) -> str:
    """One line per box, reals with exactly 6 decimal places."""
    return "".join(
        f"{b.category_index} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}\n"
        for b in label.boxes)


def parse_predictions(text: str, image_id: str = "") -> PredictionFile:
    """Parse prediction text: one ``idx conf cx cy w h`` line per entry."""
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        v = _parse_fields(line, line_no, 6)
        conf = v[1]
        if not (0.0 <= conf <= 1.0):
            raise OutOfRange(f"line {line_no}", f"confidence {conf} outside [0, 1]")
        box = _sanitize_box(int(v[0]), v[2], v[3], v[4], v[5], f"line {line_no}")
        entries.append(Prediction(box=box, confidence=conf))
    return PredictionFile(image_id=image_id, entries=entries)


def serialize_predictions(pred: PredictionFile) -> str:
    return "".join(
        f"{p.box.category_index} {p.confidence:.6f} "
        f"{p.box.cx:.6f} {p.box.cy:.6f} {p.box.w:.6f} {p.box.h:.6f}\n"
        for p in pred.entries)


def _image_id_from_ref(ref: str) -> str:
    """Stem of the image filename referenced by a Label Studio task."""
    return Path(unquote(urlsplit(str(ref)).path)).stem


def _find_rectangles(task: dict):
    """Locate the rectangle-annotation list inside a JSON-MIN task dict."""
    for value in task.values():
        if (isinstance(value, list) and value
                and all(isinstance(r, dict) and {"x", "y", "width", "height"} <= r.keys()
                        for r in value)):
            return value
        if isinstance(value, list) and not value:
            # an annotated key may legitimately hold zero rectangles
            continue
    return []


def _rectangle_label(rect: dict) -> str:
    for key in ("rectanglelabels", "labels"):
        v = rect.get(key)
        if isinstance(v, list) and v:
            return str(v[0])
    raise UnsupportedSchema(f"rectangle without a label: {sorted(rect.keys())}")


def convert_labelstudio(json_export: bytes | str,
                        category_names: list[str] | None = None) -> list[LabelFile]:
    """Convert a Label Studio JSON-MIN rectangle export to LabelFiles.

    Rectangle x/y/width/height are percentages of the image size with x/y at
    the top-left corner; they are converted to normalized center form. Label
    strings are mapped to category indices in first-seen order unless a names
    list is supplied, in which case unknown labels are an error. Rotation is
    ignored (boxes are taken as axis-aligned).
    """
    try:
        data = json.loads(json_export)
    except json.JSONDecodeError as e:
        raise UnsupportedSchema(f"not valid JSON: {e}") from None
    if not isinstance(data, list):
        raise UnsupportedSchema("expected a top-level task array")

    names = list(category_names) if category_names is not None else []
    fixed = category_names is not None
    files = []
    for task_no, task in enumerate(data):
        if not isinstance(task, dict):
            raise UnsupportedSchema(f"task {task_no} is not an object")
        if "image" not in task:
            raise UnsupportedSchema(f"task {task_no} has no 'image' key")
        image_id = _image_id_from_ref(task["image"])
        boxes = []
        for rect in _find_rectangles(task):
            label = _rectangle_label(rect)
            if label not in names:
                if fixed:
                    raise UnknownLabel(f"label {label!r} not in the supplied names")
                names.append(label)
            try:
                x, y, w, h = (float(rect[k]) for k in ("x", "y", "width", "height"))
            except (TypeError, ValueError):
                raise UnsupportedSchema(
                    f"non-numeric rectangle in task {task_no}") from None
            boxes.append(_sanitize_box(
                names.index(label),
                (x + w / 2) / 100.0, (y + h / 2) / 100.0, w / 100.0, h / 100.0,
                f"task {task_no} ({image_id})"))
        files.append(LabelFile(image_id=image_id, boxes=boxes))
    for f in files:
        f.category_names = list(names)
    return files


# ---------------------------------------------------------------------------
# file and directory helpers

def read_names(path) -> list[str]:
    """Names file: one category name per line, index = line number."""
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


def write_names(path, names: list[str]) -> None:
    _atomic_write(path, "".join(n + "\n" for n in names))


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_label_file(path, category_names: list[str] | None = None) -> LabelFile:
    path = Path(path)
    return parse_yolo_label(path.read_text(encoding="utf-8"),
                            image_id=path.stem, category_names=category_names)


def save_label_file(directory, label: LabelFile) -> Path:
    path = Path(directory) / f"{label.image_id}.txt"
    _atomic_write(path, serialize_yolo_label(label))
    return path


def load_prediction_file(path) -> PredictionFile:
    path = Path(path)
    return parse_predictions(path.read_text(encoding="utf-8"), image_id=path.stem)


def save_prediction_file(directory, pred: PredictionFile) -> Path:
    path = Path(directory) / f"{pred.image_id}.txt"
    _atomic_write(path, serialize_predictions(pred))
    return path


def read_label_dir(directory, category_names: list[str] | None = None) -> list[LabelFile]:
    """All ``*.txt`` label files in a directory, sorted by image id."""
    files = sorted(Path(directory).glob("*.txt"), key=lambda p: p.stem)
    return [load_label_file(p, category_names) for p in files if p.name != "names.txt"]


def read_prediction_dir(directory) -> list[PredictionFile]:
    files = sorted(Path(directory).glob("*.txt"), key=lambda p: p.stem)
    return [load_prediction_file(p) for p in files if p.name != "names.txt"]


def strip_categories(label: LabelFile) -> LabelFile:
    """Copy of a label file with every category index reset to 0."""
    return LabelFile(
        image_id=label.image_id,
        boxes=[replace(b, category_index=0) for b in label.boxes],
        category_names=None)
