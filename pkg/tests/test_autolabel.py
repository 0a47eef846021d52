import numpy as np
import pytest
from PIL import Image

from coffeevision.annotations import (LabelFile, NormalizedBox,
                                      load_label_file, read_label_dir,
                                      save_label_file, serialize_yolo_label,
                                      strip_categories)
from coffeevision.autolabel import (GeometryMismatch, MissingImage, RelabelJob,
                                    compare_labelings, find_image, relabel)
from coffeevision.clustering import kmeans_predict, order_clusters
from coffeevision.color import extract_ab
from coffeevision.synth import STAGE_COLORS


def write_image(path, pixels):
    Image.fromarray(pixels).save(path)


def uniform_patch(color):
    return np.full((28, 28, 3), color, dtype=np.uint8)


@pytest.fixture()
def aligned(berry_model, berry_features):
    features, stages = berry_features
    return order_clusters(berry_model, list(zip(features, stages)))


class TestRelabel:
    def test_constant_color_boxes(self, tmp_path, berry_model, aligned):
        # one image with 3 boxes over pure-cherry regions
        images = tmp_path / "img"
        labels = tmp_path / "lab"
        out = tmp_path / "out"
        images.mkdir(), labels.mkdir()
        pixels = np.full((120, 120, 3), STAGE_COLORS["cherry"], dtype=np.uint8)
        write_image(images / "a.png", pixels)
        boxes = [NormalizedBox(0, 0.25, 0.25, 0.3, 0.3),
                 NormalizedBox(1, 0.7, 0.3, 0.2, 0.2),
                 NormalizedBox(4, 0.5, 0.75, 0.4, 0.3)]
        save_label_file(labels, LabelFile("a", boxes))

        cherry_stage = aligned.stage_of(
            kmeans_predict(berry_model, extract_ab(uniform_patch(STAGE_COLORS["cherry"]))))
        summary = relabel(RelabelJob(images, labels, berry_model, aligned, out))
        assert summary.images_processed == 1
        assert summary.boxes_relabeled == 3
        got = load_label_file(out / "a.txt")
        assert all(b.category_index == cherry_stage for b in got.boxes)
        # geometry untouched, byte for byte
        got_geo = [line.split()[1:] for line in
                   (out / "a.txt").read_text().splitlines()]
        want_geo = [line.split()[1:] for line in
                    serialize_yolo_label(LabelFile("a", boxes)).splitlines()]
        assert got_geo == want_geo

    def test_empty_labels_dir(self, tmp_path, berry_model, aligned):
        (tmp_path / "img").mkdir(), (tmp_path / "lab").mkdir()
        summary = relabel(RelabelJob(tmp_path / "img", tmp_path / "lab",
                                     berry_model, aligned, tmp_path / "out"))
        assert summary.images_processed == 0
        assert summary.boxes_relabeled == 0
        assert not list((tmp_path / "out").glob("*.txt"))

    def test_synthetic_recovery(self, tmp_path, berry_dataset, berry_model, aligned):
        out = tmp_path / "relabeled"
        summary = relabel(RelabelJob(berry_dataset["images"],
                                     berry_dataset["labels_boxes"],
                                     berry_model, aligned, out))
        assert summary.skipped == 0
        total = hits = 0
        for truth in read_label_dir(berry_dataset["labels_true"]):
            got = load_label_file(out / f"{truth.image_id}.txt")
            for t_box, g_box in zip(truth.boxes, got.boxes):
                total += 1
                hits += (t_box.category_index == g_box.category_index)
        assert total == summary.boxes_relabeled
        assert hits / total >= 0.95

    def test_idempotent(self, tmp_path, berry_dataset, berry_model, aligned):
        first = tmp_path / "first"
        second = tmp_path / "second"
        relabel(RelabelJob(berry_dataset["images"], berry_dataset["labels_boxes"],
                           berry_model, aligned, first))
        relabel(RelabelJob(berry_dataset["images"], first,
                           berry_model, aligned, second))
        for path in sorted(first.glob("*.txt")):
            assert (second / path.name).read_bytes() == path.read_bytes()

    def test_category_range(self, tmp_path, berry_dataset, berry_model, aligned):
        out = tmp_path / "ranged"
        relabel(RelabelJob(berry_dataset["images"], berry_dataset["labels_boxes"],
                           berry_model, aligned, out))
        for lf in read_label_dir(out):
            assert all(b.category_index < berry_model.k for b in lf.boxes)

    def test_missing_image(self, tmp_path, berry_model, aligned):
        (tmp_path / "img").mkdir(), (tmp_path / "lab").mkdir()
        save_label_file(tmp_path / "lab",
                        LabelFile("ghost", [NormalizedBox(0, 0.5, 0.5, 0.2, 0.2)]))
        with pytest.raises(MissingImage):
            relabel(RelabelJob(tmp_path / "img", tmp_path / "lab",
                               berry_model, aligned, tmp_path / "out"))

    def test_degenerate_box_skipped(self, tmp_path, berry_model, aligned):
        images, labels = tmp_path / "img", tmp_path / "lab"
        images.mkdir(), labels.mkdir()
        write_image(images / "a.png",
                    np.full((300, 300, 3), STAGE_COLORS["green"], dtype=np.uint8))
        save_label_file(labels, LabelFile("a", [
            NormalizedBox(0, 0.5, 0.5, 0.2, 0.2),
            NormalizedBox(0, 0.5, 0.5, 0.001, 0.2),   # 0.3px wide
        ]))
        summary = relabel(RelabelJob(images, labels, berry_model, aligned,
                                     tmp_path / "out"))
        assert summary.boxes_relabeled == 1
        assert summary.skipped == 1

    def test_job_validation(self, tmp_path, berry_model, aligned):
        with pytest.raises(ValueError):
            RelabelJob(tmp_path / "missing", tmp_path, berry_model, aligned,
                       tmp_path / "out")

    def test_find_image_suffixes(self, tmp_path):
        write_image(tmp_path / "x.jpeg", np.zeros((4, 4, 3), dtype=np.uint8))
        assert find_image(tmp_path, "x").suffix == ".jpeg"
        with pytest.raises(MissingImage):
            find_image(tmp_path, "y")


def _write_labels(directory, files):
    directory.mkdir(parents=True, exist_ok=True)
    for lf in files:
        save_label_file(directory, lf)


class TestCompareLabelings:
    def _labeled(self, rng, n_images=5, n_boxes=8, k=5):
        files = []
        for i in range(n_images):
            boxes = []
            for j in range(n_boxes):
                # disjoint grid so geometry is unambiguous
                cx = (j % 4) * 0.25 + 0.125
                cy = (j // 4) * 0.25 + 0.125
                boxes.append(NormalizedBox(int(rng.integers(k)), cx, cy, 0.2, 0.2))
            files.append(LabelFile(f"img_{i}", boxes))
        return files

    def test_self_agreement(self, tmp_path):
        rng = np.random.default_rng(1)
        files = self._labeled(rng)
        _write_labels(tmp_path / "a", files)
        _write_labels(tmp_path / "b", files)
        report = compare_labelings(tmp_path / "a", tmp_path / "b")
        assert report.agreement == 1.0
        for i, row in enumerate(report.confusion):
            for j, n in enumerate(row):
                assert (i == j) or n == 0

    def test_disjoint_assignments(self, tmp_path):
        files = [LabelFile("a", [NormalizedBox(0, 0.08 * (j + 1), 0.5, 0.05, 0.05)
                                 for j in range(10)])]
        flipped = [LabelFile("a", [NormalizedBox(1, b.cx, b.cy, b.w, b.h)
                                   for b in files[0].boxes])]
        _write_labels(tmp_path / "a", files)
        _write_labels(tmp_path / "b", flipped)
        report = compare_labelings(tmp_path / "a", tmp_path / "b")
        assert report.agreement == 0.0
        assert report.total == 10

    def test_noise_rate(self, tmp_path):
        rng = np.random.default_rng(2)
        files = self._labeled(rng, n_images=63, n_boxes=8, k=5)   # 504 boxes
        noisy = []
        flips = 0
        for lf in files:
            boxes = []
            for b in lf.boxes:
                if rng.random() < 0.2:
                    flips += 1
                    boxes.append(NormalizedBox((b.category_index + 1) % 5,
                                               b.cx, b.cy, b.w, b.h))
                else:
                    boxes.append(b)
            noisy.append(LabelFile(lf.image_id, boxes))
        _write_labels(tmp_path / "a", files)
        _write_labels(tmp_path / "b", noisy)
        report = compare_labelings(tmp_path / "a", tmp_path / "b")
        assert report.agreement == 1.0 - flips / report.total
        assert abs(report.agreement - 0.8) <= 0.05

    def test_geometry_mismatch(self, tmp_path):
        _write_labels(tmp_path / "a",
                      [LabelFile("x", [NormalizedBox(0, 0.3, 0.3, 0.2, 0.2)])])
        _write_labels(tmp_path / "b",
                      [LabelFile("x", [NormalizedBox(0, 0.7, 0.7, 0.2, 0.2)])])
        with pytest.raises(GeometryMismatch):
            compare_labelings(tmp_path / "a", tmp_path / "b")

    def test_image_set_mismatch(self, tmp_path):
        _write_labels(tmp_path / "a", [LabelFile("x", [])])
        _write_labels(tmp_path / "b", [LabelFile("y", [])])
        with pytest.raises(GeometryMismatch):
            compare_labelings(tmp_path / "a", tmp_path / "b")

    def test_box_count_mismatch(self, tmp_path):
        _write_labels(tmp_path / "a",
                      [LabelFile("x", [NormalizedBox(0, 0.3, 0.3, 0.2, 0.2)])])
        _write_labels(tmp_path / "b", [LabelFile("x", [])])
        with pytest.raises(GeometryMismatch):
            compare_labelings(tmp_path / "a", tmp_path / "b")
