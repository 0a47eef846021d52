"""
Color clustering and maturity ordering
======================================

K-means over crop chroma vectors discovers the fruit color classes without
any category labels. A k sweep (2..7) shows the inertia elbow; the chosen
model's clusters are then ordered into maturity stages and projected to 2-D
for a look at the class boundaries.
"""

import tempfile
from pathlib import Path

import numpy as np

from coffeevision import kmeans_fit, order_clusters, pca_project, purity
from coffeevision.clustering import predict_many, write_pca_csv
from coffeevision.color import crop_resize, extract_ab, load_image
from coffeevision.synth import generate_dataset

work = Path(tempfile.mkdtemp(prefix="coffeevision-demo-"))
scenes = generate_dataset(work, n_images=30, berries_per_image=15, seed=21)
print(f"generated {len(scenes)} synthetic branch images in {work}")

features, true_stages = [], []
for scene in scenes:
    image = load_image(work / "images" / f"{scene.image_id}.png")
    for i, box in enumerate(scene.label.boxes):
        features.append(extract_ab(crop_resize(image, box), scene.image_id, i))
        true_stages.append(box.category_index)
true_stages = np.array(true_stages)
print(f"extracted {len(features)} crop features\n")

print("k sweep (watch the inertia drop flatten):")
models = {}
for k in range(2, 8):
    models[k] = kmeans_fit(features, k=k, seed=0)
    print(f"  k={k}: inertia={models[k].inertia:14.1f} "
          f"({models[k].iterations_run} iterations)")

model = models[5]
labels = predict_many(model, features)
print(f"\nk=5 purity against the generator's stages: "
      f"{purity(labels, true_stages):.3f}")

# order clusters into maturity stages by majority vote against references
maturity = order_clusters(model, list(zip(features, true_stages)))
print(f"cluster -> stage map: {maturity.cluster_to_stage}")
print(f"stage names: {maturity.stage_names}")

projection = pca_project(features, labels)
csv_path = work / "pca.csv"
write_pca_csv(csv_path, projection, maturity)
print(f"\n2-D projection explains {projection.explained_variance[0]:.0f} + "
      f"{projection.explained_variance[1]:.0f} of the variance")
print(f"plot-ready points written to {csv_path}")
