import numpy as np
import pytest

from coffeevision import clustering, color, synth


@pytest.fixture(scope="session")
def berry_dataset(tmp_path_factory):
    """A small labeled synthetic dataset shared across tests."""
    root = tmp_path_factory.mktemp("berries")
    scenes = synth.generate_dataset(root, n_images=20, berries_per_image=12, seed=7)
    return {"root": root, "scenes": scenes,
            "images": root / "images", "labels_true": root / "labels_true",
            "labels_boxes": root / "labels_boxes", "names": root / "names.txt"}


@pytest.fixture(scope="session")
def berry_features(berry_dataset):
    """(features, true stage indices) extracted from the shared dataset."""
    features, stages = [], []
    for scene in berry_dataset["scenes"]:
        image = color.load_image(
            berry_dataset["images"] / f"{scene.image_id}.png")
        for i, box in enumerate(scene.label.boxes):
            features.append(color.extract_ab(color.crop_resize(image, box),
                                             scene.image_id, i))
            stages.append(box.category_index)
    return features, np.array(stages)


@pytest.fixture(scope="session")
def berry_model(berry_features):
    features, _ = berry_features
    return clustering.kmeans_fit(features, k=5, seed=42)
