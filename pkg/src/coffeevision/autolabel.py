"""Semi-supervised relabeling: manual boxes, machine maturity categories.

The split of supervision is exactly: box geometry is trusted and never
touched, while every category index in the input is ignored and replaced by
the fitted color model's maturity stage for that crop. Degenerate boxes
(smaller than one pixel) are skipped and counted rather than fatal, since
field annotations are noisy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .annotations import LabelFile, load_label_file, save_label_file
from .clustering import KMeansModel, MaturityMap, kmeans_predict
from .color import DegenerateBox, crop_resize, extract_ab, load_image
from .errors import CoffeeVisionError
from .metrics import iou

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG")
GEOMETRY_IOU = 0.999   # boxes this close are "the same box" when comparing


class MissingImage(CoffeeVisionError):
    """A label file has no decodable image next to it."""


class GeometryMismatch(CoffeeVisionError):
    """Two labelings do not cover the same boxes."""


@dataclass
class RelabelJob:
    images_dir: Path
    labels_dir: Path
    model: KMeansModel
    maturity: MaturityMap
    output_dir: Path

    def __post_init__(self):
        self.images_dir = Path(self.images_dir)
        self.labels_dir = Path(self.labels_dir)
        self.output_dir = Path(self.output_dir)
        if self.model.k != len(self.maturity.stage_names):
            raise ValueError(f"model k={self.model.k} != "
                             f"{len(self.maturity.stage_names)} stage names")
        for d in (self.images_dir, self.labels_dir):
            if not d.is_dir():
                raise ValueError(f"{d} is not a directory")


@dataclass
class RelabelSummary:
    images_processed: int = 0
    boxes_relabeled: int = 0
    skipped: int = 0
    per_stage: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "images_processed": self.images_processed,
            "boxes_relabeled": self.boxes_relabeled,
            "skipped": self.skipped,
            "per_stage": self.per_stage,
        }, ensure_ascii=False, separators=(",", ":"))


def find_image(images_dir: Path, image_id: str) -> Path:
    """Locate the PNG/JPEG file for an image id, or raise MissingImage."""
    for suffix in IMAGE_SUFFIXES:
        candidate = Path(images_dir) / f"{image_id}{suffix}"
        if candidate.is_file():
            return candidate
    raise MissingImage(f"no image for {image_id!r} in {images_dir}")


def relabel_label_file(label: LabelFile, image, model: KMeansModel,
                       maturity: MaturityMap) -> tuple[LabelFile, int]:
    """Relabel one file against a decoded image; returns (output, skipped)."""
    out_boxes = []
    skipped = 0
    for i, box in enumerate(label.boxes):
        try:
            patch = crop_resize(image, box)
        except DegenerateBox:
            skipped += 1
            continue
        feature = extract_ab(patch, label.image_id, i)
        stage = maturity.stage_of(kmeans_predict(model, feature))
        out_boxes.append(replace(box, category_index=stage))
    return LabelFile(image_id=label.image_id, boxes=out_boxes,
                     category_names=list(maturity.stage_names)), skipped


def relabel(job: RelabelJob) -> RelabelSummary:
    """Run the machine annotator over a whole labels directory.

    Inputs are never modified; one output label file is written (atomically)
    per input file, with identical geometry and machine stage categories.
    """
    job.output_dir.mkdir(parents=True, exist_ok=True)
    summary = RelabelSummary(per_stage={n: 0 for n in job.maturity.stage_names})
    label_paths = sorted(p for p in job.labels_dir.glob("*.txt")
                         if p.name != "names.txt")
    for path in label_paths:
        label = load_label_file(path)
        image = load_image(find_image(job.images_dir, label.image_id))
        out, skipped = relabel_label_file(label, image, job.model, job.maturity)
        save_label_file(job.output_dir, out)
        summary.images_processed += 1
        summary.boxes_relabeled += len(out.boxes)
        summary.skipped += skipped
        for box in out.boxes:
            summary.per_stage[job.maturity.stage_names[box.category_index]] += 1
    return summary


@dataclass
class AgreementReport:
    """Stage confusion between two labelings of the same boxes."""

    confusion: list[list[int]]     # [stage in a][stage in b]
    total: int
    agreement: float

    def to_json(self) -> str:
        return json.dumps({"confusion": self.confusion, "total": self.total,
                           "agreement": self.agreement},
                          ensure_ascii=False, separators=(",", ":"))


def compare_labelings(a_dir, b_dir) -> AgreementReport:
    """Pair boxes by geometric identity and report stage agreement.

    Both directories must cover the same image ids with the same geometry;
    a box without a geometric twin (IoU > 0.999) is a GeometryMismatch.
    """
    a_dir, b_dir = Path(a_dir), Path(b_dir)
    a_ids = {p.stem for p in a_dir.glob("*.txt") if p.name != "names.txt"}
    b_ids = {p.stem for p in b_dir.glob("*.txt") if p.name != "names.txt"}
    if a_ids != b_ids:
        raise GeometryMismatch(
            f"image sets differ: only in a={sorted(a_ids - b_ids)}, "
            f"only in b={sorted(b_ids - a_ids)}")

    pairs = []
    for image_id in sorted(a_ids):
        a_boxes = load_label_file(a_dir / f"{image_id}.txt").boxes
        b_boxes = load_label_file(b_dir / f"{image_id}.txt").boxes
        if len(a_boxes) != len(b_boxes):
            raise GeometryMismatch(f"{image_id}: {len(a_boxes)} boxes vs {len(b_boxes)}")
        taken = [False] * len(b_boxes)
        for a_box in a_boxes:
            best, best_j = GEOMETRY_IOU, None
            for j, b_box in enumerate(b_boxes):
                if taken[j]:
                    continue
                v = iou(a_box, b_box)
                if v > best:
                    best, best_j = v, j
            if best_j is None:
                raise GeometryMismatch(
                    f"{image_id}: box {a_box.corners()} has no geometric twin")
            taken[best_j] = True
            pairs.append((a_box.category_index, b_boxes[best_j].category_index))

    k = 1 + max((max(a, b) for a, b in pairs), default=-1)
    confusion = [[0] * k for _ in range(k)]
    for a_cat, b_cat in pairs:
        confusion[a_cat][b_cat] += 1
    agree = sum(confusion[i][i] for i in range(k))
    total = len(pairs)
    return AgreementReport(confusion=confusion, total=total,
                           agreement=agree / total if total else 1.0)
