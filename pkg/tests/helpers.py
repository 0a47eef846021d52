"""Shared random generators for tests: boxes, files and whole scenes."""

from __future__ import annotations

import numpy as np

from coffeevision.annotations import (LabelFile, NormalizedBox, Prediction,
                                      PredictionFile)


def rand_box(rng: np.random.Generator, category: int | None = None,
             n_categories: int = 3, quantize: bool = True) -> NormalizedBox:
    """A valid random box, optionally rounded to the 6-decimal file grid."""
    w = float(rng.uniform(1e-4, 0.4))
    h = float(rng.uniform(1e-4, 0.4))
    cx = float(rng.uniform(w / 2, 1 - w / 2))
    cy = float(rng.uniform(h / 2, 1 - h / 2))
    if quantize:
        w, h = round(w, 6), round(h, 6)
        # re-center after rounding so the edges stay inside [0, 1]
        cx = min(max(round(cx, 6), w / 2), 1 - w / 2)
        cy = min(max(round(cy, 6), h / 2), 1 - h / 2)
        cx, cy = round(cx, 6), round(cy, 6)
    cat = int(rng.integers(n_categories)) if category is None else category
    return NormalizedBox(category_index=cat, cx=cx, cy=cy, w=w, h=h)


def rand_label_file(rng: np.random.Generator, image_id: str,
                    max_boxes: int = 10, n_categories: int = 3) -> LabelFile:
    boxes = [rand_box(rng, n_categories=n_categories)
             for _ in range(rng.integers(0, max_boxes + 1))]
    return LabelFile(image_id=image_id, boxes=boxes)


def rand_prediction_file(rng: np.random.Generator, image_id: str,
                         max_boxes: int = 10, n_categories: int = 3) -> PredictionFile:
    entries = [Prediction(box=rand_box(rng, n_categories=n_categories),
                          confidence=round(float(rng.random()), 6))
               for _ in range(rng.integers(0, max_boxes + 1))]
    return PredictionFile(image_id=image_id, entries=entries)


def _jitter(rng: np.random.Generator, box: NormalizedBox,
            n_categories: int) -> NormalizedBox:
    w = min(max(box.w + float(rng.normal(0, 0.02)), 0.01), 0.5)
    h = min(max(box.h + float(rng.normal(0, 0.02)), 0.01), 0.5)
    cx = min(max(box.cx + float(rng.normal(0, 0.03)), w / 2), 1 - w / 2)
    cy = min(max(box.cy + float(rng.normal(0, 0.03)), h / 2), 1 - h / 2)
    cat = box.category_index if rng.random() < 0.8 else int(rng.integers(n_categories))
    return NormalizedBox(category_index=cat, cx=cx, cy=cy, w=w, h=h)


def rand_scene(rng: np.random.Generator, max_boxes: int = 10, n_categories: int = 3):
    """A random detection scene in both object and plain-tuple form.

    Returns (label_files, prediction_files, gts_by_image, preds_by_image);
    the tuple dicts feed the brute-force oracle. Predictions mix jittered
    copies of ground truths (so true positives exist) with pure noise.
    """
    n_images = int(rng.integers(1, 3))
    label_files, pred_files = [], []
    gts_by_image, preds_by_image = {}, {}
    gt_budget = int(rng.integers(0, max_boxes + 1))
    pred_budget = int(rng.integers(0, max_boxes + 1))
    for i in range(n_images):
        image_id = f"scene_{i}"
        n_gt = int(rng.integers(0, gt_budget + 1))
        gt_budget -= n_gt
        gts = [rand_box(rng, n_categories=n_categories, quantize=False)
               for _ in range(n_gt)]

        preds = []
        for gt in gts:
            if pred_budget > 0 and rng.random() < 0.7:
                preds.append(Prediction(box=_jitter(rng, gt, n_categories),
                                        confidence=float(rng.random())))
                pred_budget -= 1
        while pred_budget > 0 and rng.random() < 0.4:
            preds.append(Prediction(box=rand_box(rng, n_categories=n_categories,
                                                 quantize=False),
                                    confidence=float(rng.random())))
            pred_budget -= 1

        label_files.append(LabelFile(image_id=image_id, boxes=gts))
        pred_files.append(PredictionFile(image_id=image_id, entries=preds))
        gts_by_image[image_id] = [
            (b.category_index, b.cx, b.cy, b.w, b.h) for b in gts]
        preds_by_image[image_id] = [
            (p.confidence, (p.box.category_index, p.box.cx, p.box.cy, p.box.w, p.box.h))
            for p in preds]
    return label_files, pred_files, gts_by_image, preds_by_image
