"""
Detector evaluation: IoU, AP and mAP@.5
=======================================

Any detector that writes 6-field prediction files can be scored against
ground truth. Here the classical color-blob baseline detects the synthetic
berries, then gets evaluated in the three report granularities (mono,
binary, multiclass) plus a degraded run to show imperfect numbers.
"""

import tempfile
from dataclasses import replace
from pathlib import Path

from coffeevision import detect_classical, evaluate, iou
from coffeevision.annotations import (NormalizedBox, Prediction,
                                      PredictionFile, read_label_dir,
                                      read_names)
from coffeevision.detectors import default_classical_spec
from coffeevision.color import load_image
from coffeevision.synth import generate_dataset

print(f"iou of identical boxes: "
      f"{iou(NormalizedBox(0, 0.5, 0.5, 0.2, 0.2), NormalizedBox(0, 0.5, 0.5, 0.2, 0.2))}")
print(f"iou of offset squares (1/7 case): "
      f"{iou(NormalizedBox(0, 0.1, 0.1, 0.2, 0.2), NormalizedBox(0, 0.2, 0.2, 0.2, 0.2)):.6f}\n")

work = Path(tempfile.mkdtemp(prefix="coffeevision-demo-"))
generate_dataset(work, n_images=12, berries_per_image=12, seed=44)
names = read_names(work / "names.txt")
labels = read_label_dir(work / "labels_true")

spec = default_classical_spec()
predictions = [detect_classical(load_image(work / "images" / f"{lf.image_id}.png"),
                                spec, lf.image_id)
               for lf in labels]

for mode in ("mono", "binary", "multiclass"):
    report = evaluate(labels, predictions, names, mode=mode)
    print(report.format_table())

# degrade the detector: drop every third prediction and shift some boxes
degraded = []
for pf in predictions:
    entries = []
    for i, p in enumerate(pf.entries):
        if i % 3 == 0:
            continue
        if i % 3 == 1:
            shifted = replace(p.box, cx=min(p.box.cx + 0.02, 1 - p.box.w / 2))
            entries.append(Prediction(shifted, p.confidence * 0.6))
        else:
            entries.append(p)
    degraded.append(PredictionFile(pf.image_id, entries))

print("after dropping/shifting predictions:")
print(evaluate(labels, degraded, names, mode="multiclass").format_table())
