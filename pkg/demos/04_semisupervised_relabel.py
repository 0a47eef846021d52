"""
Semi-supervised relabeling
==========================

The annotation split: box geometry stays manual, categories become machine
output. Starting from labels whose categories are all zeroed (pretend a
human only drew boxes), the color model assigns each crop a maturity stage,
and the result is compared against the generator's hidden truth.
"""

import tempfile
from pathlib import Path

import numpy as np

from coffeevision import RelabelJob, compare_labelings, kmeans_fit, order_clusters, relabel
from coffeevision.color import crop_resize, extract_ab, load_image
from coffeevision.synth import generate_dataset

work = Path(tempfile.mkdtemp(prefix="coffeevision-demo-"))
scenes = generate_dataset(work, n_images=30, berries_per_image=15, seed=33)
print(f"dataset in {work}")
print("labels_boxes/ has geometry only (all categories zero) -- the 'manual' side")

features, stages = [], []
for scene in scenes:
    image = load_image(work / "images" / f"{scene.image_id}.png")
    for i, box in enumerate(scene.label.boxes):
        features.append(extract_ab(crop_resize(image, box), scene.image_id, i))
        stages.append(box.category_index)

model = kmeans_fit(features, k=5, seed=0)
maturity = order_clusters(model, list(zip(features, stages)))

out = work / "labels_machine"
summary = relabel(RelabelJob(images_dir=work / "images",
                             labels_dir=work / "labels_boxes",
                             model=model, maturity=maturity, output_dir=out))
print(f"\nrelabeled {summary.boxes_relabeled} boxes in "
      f"{summary.images_processed} images ({summary.skipped} skipped)")
print(f"per-stage counts: {summary.per_stage}")

report = compare_labelings(work / "labels_true", out)
print(f"\nagreement with the generator's hidden truth: {report.agreement:.3f}")
print("confusion (rows = truth, cols = machine):")
print(np.array(report.confusion))
