"""Detection evaluation: IoU, greedy matching, AP and mAP@.5.

Matching follows the de-facto detector convention: within each (image,
category), predictions are taken in descending confidence order and each one
greedily claims the unmatched ground-truth box with the highest IoU at or
above the threshold; everything else is a false positive. AP is the all-point
interpolated area under the precision/recall curve (monotone envelope), and
mAP@.5 is the arithmetic mean of per-category AP at IoU threshold 0.5.

Reports carry one precision and one recall column computed at a single
confidence threshold (0.25 unless configured), alongside AP, in mono, binary
or multiclass category granularity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .annotations import LabelFile, NormalizedBox, Prediction, PredictionFile
from .errors import CoffeeVisionError
from .ripeness import DEFAULT_RIPE_STAGES, UnknownStage

DEFAULT_IOU_THRESHOLD = 0.5
# Single report threshold, shared with the service's counting cutoff.
DEFAULT_CONFIDENCE_THRESHOLD = 0.25

MODES = ("mono", "binary", "multiclass")
BINARY_NAMES = ["unripe", "ripe"]
MONO_NAMES = ["fruit"]


class NoCategories(CoffeeVisionError):
    """Every category has undefined AP (nothing annotated, nothing predicted)."""


def iou(a: NormalizedBox, b: NormalizedBox) -> float:
    """Intersection over union of two normalized boxes; 0 when disjoint."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from the same corner arithmetic keep iou(b, b) at exactly 1.0
    union = ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter)
    return inter / union


@dataclass(frozen=True)
class PredictionFlag:
    """Outcome of one prediction after matching."""

    confidence: float
    is_tp: bool
    matched_gt: int | None = None


@dataclass
class MatchResult:
    """TP/FP flags for one (image, category) pair, confidence-descending."""

    flags: list[PredictionFlag]
    n_gt: int
    iou_threshold: float

    @property
    def tp(self) -> int:
        return sum(1 for f in self.flags if f.is_tp)

    @property
    def fp(self) -> int:
        return len(self.flags) - self.tp

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


def match_boxes(predictions: list[Prediction], ground_truth: list[NormalizedBox],
                iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> MatchResult:
    """Greedy one-to-one matching for a single image and category.

    Predictions are sorted by descending confidence (ties keep input order);
    each claims the unmatched ground truth with the highest IoU >= threshold
    (IoU ties go to the lowest ground-truth index).
    """
    order = sorted(range(len(predictions)),
                   key=lambda i: -predictions[i].confidence)
    taken = [False] * len(ground_truth)
    flags = []
    for i in order:
        pred = predictions[i]
        best_iou, best_j = -1.0, None
        for j, gt in enumerate(ground_truth):
            if taken[j]:
                continue
            v = iou(pred.box, gt)
            if v >= iou_threshold and v > best_iou:
                best_iou, best_j = v, j
        if best_j is None:
            flags.append(PredictionFlag(pred.confidence, False))
        else:
            taken[best_j] = True
            flags.append(PredictionFlag(pred.confidence, True, best_j))
    return MatchResult(flags=flags, n_gt=len(ground_truth),
                       iou_threshold=iou_threshold)


def match(predictions: list[PredictionFile], ground_truth: list[LabelFile],
          iou_threshold: float = DEFAULT_IOU_THRESHOLD,
          n_categories: int | None = None) -> dict[tuple[str, int], MatchResult]:
    """Match prediction files against label files, per (image id, category).

    The image universe is the union of both sides; a missing prediction file
    means zero predictions, a missing label file means zero ground truths.
    """
    preds_by_image = {p.image_id: p.entries for p in predictions}
    gts_by_image = {g.image_id: g.boxes for g in ground_truth}
    image_ids = sorted(set(preds_by_image) | set(gts_by_image))
    if n_categories is None:
        n_categories = 1 + max(
            [p.box.category_index for e in preds_by_image.values() for p in e] +
            [b.category_index for bs in gts_by_image.values() for b in bs],
            default=-1)
    results = {}
    for image_id in image_ids:
        preds = preds_by_image.get(image_id, [])
        gts = gts_by_image.get(image_id, [])
        for cat in range(n_categories):
            results[(image_id, cat)] = match_boxes(
                [p for p in preds if p.box.category_index == cat],
                [b for b in gts if b.category_index == cat],
                iou_threshold)
    return results


def average_precision(flags: list[PredictionFlag], gt_count: int) -> float | None:
    """All-point interpolated AP from matched prediction flags.

    Returns None (category undefined, excluded from mAP) when there is
    nothing annotated and nothing predicted; 0.0 when predictions exist but
    no ground truth does.
    """
    if gt_count == 0:
        return None if not flags else 0.0
    if not flags:
        return 0.0
    ordered = sorted(flags, key=lambda f: -f.confidence)
    is_tp = np.array([f.is_tp for f in ordered])
    precision = np.cumsum(is_tp) / np.arange(1, len(ordered) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # recall rises by exactly 1/gt at each TP, so the area under the
    # envelope is the mean envelope precision over TP points; summing once
    # and dividing keeps the perfect-detector case at exactly 1.0
    return float(envelope[is_tp].sum() / gt_count)


def map_at_50(per_category_aps) -> float:
    """Arithmetic mean over categories whose AP is defined."""
    defined = [ap for ap in per_category_aps if ap is not None]
    if not defined:
        raise NoCategories("no category has a defined AP")
    return sum(defined) / len(defined)


def precision_recall(result: MatchResult) -> tuple[float, float]:
    """(P, R) with the vacuous conventions: P=R=1 when nothing was predicted
    and nothing was present; P=0 when ground truth exists but nothing was
    predicted; R=1 when there is no ground truth."""
    tp, fp, fn = result.tp, result.fp, result.fn
    if tp + fp > 0:
        p = tp / (tp + fp)
    else:
        p = 1.0 if result.n_gt == 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 1.0
    return p, r


# ---------------------------------------------------------------------------
# full evaluation report

@dataclass
class CategoryReport:
    name: str
    precision: float
    recall: float
    ap: float | None
    n_gt: int
    n_pred: int
    tp: int
    fp: int
    fn: int


@dataclass
class EvalReport:
    mode: str
    categories: list[CategoryReport]
    map50: float
    iou_threshold: float
    confidence_threshold: float
    counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "iou_threshold": self.iou_threshold,
            "confidence_threshold": self.confidence_threshold,
            "per_category": [
                {"name": c.name, "P": c.precision, "R": c.recall, "AP": c.ap,
                 "gt": c.n_gt, "pred": c.n_pred,
                 "tp": c.tp, "fp": c.fp, "fn": c.fn}
                for c in self.categories],
            "mAP50": self.map50,
            "counts": self.counts,
        }
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))

    def format_table(self) -> str:
        """Aligned text table: one row per category plus the mAP@.5 line."""
        header = f"{'category':<14} {'P':>7} {'R':>7} {'AP@.5':>7} {'gt':>6} {'pred':>6}"
        lines = [header, "-" * len(header)]
        for c in self.categories:
            ap = f"{c.ap:.3f}" if c.ap is not None else "  n/a"
            lines.append(f"{c.name:<14} {c.precision:>7.3f} {c.recall:>7.3f} "
                         f"{ap:>7} {c.n_gt:>6} {c.n_pred:>6}")
        lines.append("-" * len(header))
        lines.append(f"{'mAP@.5':<14} {self.map50:>7.3f}   "
                     f"(mode={self.mode}, IoU>={self.iou_threshold}, "
                     f"conf>={self.confidence_threshold})")
        return "\n".join(lines) + "\n"


def _project_category(mode: str, category_names: list[str] | None,
                      ripe_stages: set[str]):
    """Return (projected names, index-mapping function) for a report mode."""
    if mode == "multiclass":
        if category_names is None:
            raise ValueError("multiclass mode needs category names")
        return list(category_names), lambda i: i
    if mode == "mono":
        return list(MONO_NAMES), lambda i: 0
    if mode == "binary":
        if category_names is None:
            raise ValueError("binary mode needs category names to split unripe/ripe")
        for stage in ripe_stages:
            if stage not in category_names:
                raise UnknownStage(f"ripe stage {stage!r} not among {category_names}")
        is_ripe = [name in ripe_stages for name in category_names]

        def mapping(i: int) -> int:
            if i >= len(is_ripe):
                raise UnknownStage(f"category index {i} has no name")
            return 1 if is_ripe[i] else 0

        return list(BINARY_NAMES), mapping
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _apply_projection(labels, predictions, mapping):
    projected_labels = [
        LabelFile(image_id=lf.image_id,
                  boxes=[replace(b, category_index=mapping(b.category_index))
                         for b in lf.boxes])
        for lf in labels]
    projected_preds = [
        PredictionFile(image_id=pf.image_id,
                       entries=[Prediction(box=replace(p.box,
                                                       category_index=mapping(p.box.category_index)),
                                           confidence=p.confidence)
                                for p in pf.entries])
        for pf in predictions]
    return projected_labels, projected_preds


def evaluate(labels: list[LabelFile], predictions: list[PredictionFile],
             category_names: list[str] | None = None, mode: str = "multiclass",
             iou_threshold: float = DEFAULT_IOU_THRESHOLD,
             confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
             ripe_stages: set[str] | None = None) -> EvalReport:
    """Evaluate a prediction set against ground truth in the given mode.

    Binary and mono modes are projections of the multiclass labels, so one
    ground-truth set serves all three report granularities. P and R are
    computed at `confidence_threshold`; AP sweeps all confidences.
    """
    ripe = set(DEFAULT_RIPE_STAGES) if ripe_stages is None else set(ripe_stages)
    names, mapping = _project_category(mode, category_names, ripe)
    labels, predictions = _apply_projection(labels, predictions, mapping)

    matches = match(predictions, labels, iou_threshold, n_categories=len(names))
    image_ids = sorted({img for img, _ in matches})

    categories = []
    totals = {"gt": 0, "pred": 0, "tp": 0, "fp": 0, "fn": 0}
    for cat, name in enumerate(names):
        pooled: list[PredictionFlag] = []
        n_gt = 0
        for image_id in image_ids:
            m = matches[(image_id, cat)]
            pooled.extend(m.flags)
            n_gt += m.n_gt
        ap = average_precision(pooled, n_gt)

        kept = [f for f in pooled if f.confidence >= confidence_threshold]
        tp = sum(1 for f in kept if f.is_tp)
        fp = len(kept) - tp
        fn = n_gt - tp
        combined = MatchResult(flags=kept, n_gt=n_gt, iou_threshold=iou_threshold)
        p, r = precision_recall(combined)
        categories.append(CategoryReport(name=name, precision=p, recall=r, ap=ap,
                                         n_gt=n_gt, n_pred=len(kept),
                                         tp=tp, fp=fp, fn=fn))
        totals["gt"] += n_gt
        totals["pred"] += len(kept)
        totals["tp"] += tp
        totals["fp"] += fp
        totals["fn"] += fn

    map50 = map_at_50([c.ap for c in categories])
    return EvalReport(mode=mode, categories=categories, map50=map50,
                      iou_threshold=iou_threshold,
                      confidence_threshold=confidence_threshold, counts=totals)
