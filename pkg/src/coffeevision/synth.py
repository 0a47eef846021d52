"""Synthetic berry-branch image generator for tests, demos and benchmarks.

Real annotated coffee-branch photo sets are not redistributable, so the test
and acceptance suites run on generated scenes: flat-colored berry discs on a
near-white background, one disc per grid cell so boxes never overlap, with a
small per-berry RGB jitter. The five stage colors were picked so their
jittered a*/b* ranges are pairwise disjoint (and match the default chroma
windows of the classical detector).

A season generator produces one dated image per day whose stage mix drifts
from green to dry along a logistic curve, together with the planted-truth
counts and ripeness series that a correct pipeline must reproduce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
from PIL import Image

from .annotations import (DEFAULT_STAGE_NAMES, LabelFile, NormalizedBox,
                          save_label_file, strip_categories, write_names)
from .ripeness import DEFAULT_RIPE_STAGES

STAGE_COLORS = {
    "green": (45, 140, 55),
    "green-yellow": (165, 175, 45),
    "cherry": (185, 30, 45),
    "raisin": (95, 25, 75),
    "dry": (85, 55, 35),
}
BACKGROUND = (245, 245, 245)
COLOR_JITTER = 8

CELL = 48                    # grid cell side, px
RADIUS_RANGE = (10, 14)      # berry radius, px
# radius + jitter stays 8 px short of CELL/2, so neighboring discs never get
# close enough for the detector's morphological closing to bridge them
CENTER_JITTER = 6


@dataclass
class SyntheticImage:
    image_id: str
    pixels: np.ndarray       # HxWx3 uint8
    label: LabelFile         # true stage categories


def _draw_disc(pixels: np.ndarray, cx: float, cy: float, radius: float, color) -> None:
    """Fill pixels whose centers fall inside the disc; no anti-aliasing."""
    r0 = max(int(np.floor(cy - radius)), 0)
    r1 = min(int(np.ceil(cy + radius)) + 1, pixels.shape[0])
    c0 = max(int(np.floor(cx - radius)), 0)
    c1 = min(int(np.ceil(cx + radius)) + 1, pixels.shape[1])
    ys = np.arange(r0, r1)[:, None] + 0.5
    xs = np.arange(c0, c1)[None, :] + 0.5
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    pixels[r0:r1, c0:c1][inside] = color


def make_berry_image(image_id: str, berry_stages: list[int],
                     rng: np.random.Generator, size: int = 336) -> SyntheticImage:
    """One branch scene: one berry disc per grid cell, true labels attached."""
    cells_per_side = size // CELL
    n_cells = cells_per_side ** 2
    if len(berry_stages) > n_cells:
        raise ValueError(f"at most {n_cells} berries fit a {size}px image")

    pixels = np.empty((size, size, 3), dtype=np.uint8)
    pixels[:] = BACKGROUND
    boxes = []
    cells = rng.choice(n_cells, size=len(berry_stages), replace=False)
    for stage, cell in zip(berry_stages, cells):
        row, col = divmod(int(cell), cells_per_side)
        cx = (col + 0.5) * CELL + int(rng.integers(-CENTER_JITTER, CENTER_JITTER + 1))
        cy = (row + 0.5) * CELL + int(rng.integers(-CENTER_JITTER, CENTER_JITTER + 1))
        radius = int(rng.integers(RADIUS_RANGE[0], RADIUS_RANGE[1] + 1))
        base = STAGE_COLORS[DEFAULT_STAGE_NAMES[stage]]
        color = np.clip(np.array(base) + rng.integers(-COLOR_JITTER, COLOR_JITTER + 1, 3),
                        0, 255).astype(np.uint8)
        _draw_disc(pixels, cx, cy, radius, color)
        boxes.append(NormalizedBox(category_index=stage,
                                   cx=cx / size, cy=cy / size,
                                   w=2 * radius / size, h=2 * radius / size))
    label = LabelFile(image_id=image_id, boxes=boxes,
                      category_names=list(DEFAULT_STAGE_NAMES))
    return SyntheticImage(image_id=image_id, pixels=pixels, label=label)


def balanced_stages(n: int, rng: np.random.Generator, n_stages: int = 5) -> list[int]:
    """n stage indices with near-equal per-stage counts, shuffled."""
    stages = [i % n_stages for i in range(n)]
    rng.shuffle(stages)
    return stages


def generate_dataset(out_dir, n_images: int, berries_per_image: int,
                     seed: int, size: int = 336) -> list[SyntheticImage]:
    """Write a labeled berry dataset: images/, labels_true/, labels_boxes/, names.txt.

    labels_true carries the generator's stage categories; labels_boxes is the
    same geometry with every category zeroed, standing in for box-only manual
    annotation.
    """
    out = Path(out_dir)
    images_dir = out / "images"
    true_dir = out / "labels_true"
    boxes_dir = out / "labels_boxes"
    for d in (images_dir, true_dir, boxes_dir):
        d.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(n_images):
        stages = balanced_stages(berries_per_image, rng)
        scene = make_berry_image(f"img_{i:04d}", stages, rng, size=size)
        Image.fromarray(scene.pixels).save(images_dir / f"{scene.image_id}.png")
        save_label_file(true_dir, scene.label)
        save_label_file(boxes_dir, strip_categories(scene.label))
        scenes.append(scene)
    write_names(out / "names.txt", list(DEFAULT_STAGE_NAMES))
    return scenes


def season_stage_weights(day: int, days: int) -> np.ndarray:
    """Stage mix for one day: a bump sliding from green to dry over the season."""
    x = (day - days / 2) / (days / 8)
    center = (len(DEFAULT_STAGE_NAMES) - 1) / (1.0 + np.exp(-x))
    idx = np.arange(len(DEFAULT_STAGE_NAMES))
    w = np.exp(-((idx - center) ** 2) / (2 * 0.8 ** 2))
    return w / w.sum()


def generate_season(out_dir, days: int, berries_per_image: int, seed: int,
                    size: int = 336, start: str = "2024-05-01T08:00:00") -> list[dict]:
    """Write a dated ripening season and its planted-truth ripeness series.

    Outputs: images/, labels_true/, names.txt, season.csv (image_id,
    captured_at) and truth.json with per-day counts and percentages computed
    straight from the planted stage assignments.
    """
    out = Path(out_dir)
    images_dir = out / "images"
    true_dir = out / "labels_true"
    for d in (images_dir, true_dir):
        d.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    start_dt = datetime.fromisoformat(start)
    ripe_set = set(DEFAULT_RIPE_STAGES)
    truth = []
    schedule = []
    for day in range(days):
        weights = season_stage_weights(day, days)
        stages = [int(s) for s in rng.choice(len(weights), size=berries_per_image,
                                             p=weights)]
        image_id = f"day_{day:03d}"
        scene = make_berry_image(image_id, stages, rng, size=size)
        Image.fromarray(scene.pixels).save(images_dir / f"{image_id}.png")
        save_label_file(true_dir, scene.label)

        captured_at = (start_dt + timedelta(days=day)).isoformat()
        schedule.append((image_id, captured_at))
        counts = {name: 0 for name in DEFAULT_STAGE_NAMES}
        for s in stages:
            counts[DEFAULT_STAGE_NAMES[s]] += 1
        ripe = sum(n for name, n in counts.items() if name in ripe_set)
        total = sum(counts.values())
        ripeness = 100.0 * ripe / total
        truth.append({
            "image_id": image_id,
            "captured_at": captured_at,
            "counts": counts,
            "ripeness_percent": ripeness,
            "unripeness_percent": 100.0 - ripeness,
        })

    write_names(out / "names.txt", list(DEFAULT_STAGE_NAMES))
    (out / "season.csv").write_text(
        "image_id,captured_at\n" +
        "".join(f"{i},{t}\n" for i, t in schedule), encoding="utf-8")
    (out / "truth.json").write_text(json.dumps(truth, indent=2), encoding="utf-8")
    return truth
