"""Prediction sources: external detector output and a classical color-blob baseline.

The classical detector exists so the whole pipeline (evaluation, ripeness
tracking, the REST service) runs end to end without any trained network: it
thresholds the image in a*/b* chroma space per stage, cleans the masks with a
morphological open/close, and turns 4-connected components into boxes. It is
a baseline for plumbing and testing, not a substitute for a real detector.

The default chroma windows are tuned to the synthetic berry palette in
`synth` (verified by a cross-check test); real field imagery needs its own
config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annotations import (NormalizedBox, Prediction, PredictionFile,
                          load_prediction_file)
from .color import srgb_to_lab
from .errors import CoffeeVisionError

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class MissingPredictions(CoffeeVisionError):
    """No prediction file exists for the requested image."""


@dataclass(frozen=True)
class ChromaWindow:
    """Axis-aligned rectangle in the (a*, b*) plane for one stage."""

    stage: str
    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float

    def __post_init__(self):
        if self.a_lo > self.a_hi or self.b_lo > self.b_hi:
            raise ValueError(f"empty chroma window for {self.stage!r}")

    def contains(self, a: float, b: float) -> bool:
        return self.a_lo <= a <= self.a_hi and self.b_lo <= b <= self.b_hi


# Tuned to the synthetic berry palette (stage color +-8 RGB jitter), pairwise
# disjoint and excluding the neutral axis so background never fires.
DEFAULT_WINDOWS = [
    ChromaWindow("green", -55.0, -35.0, 25.0, 48.0),
    ChromaWindow("green-yellow", -31.0, -8.0, 51.0, 70.0),
    ChromaWindow("cherry", 50.0, 68.0, 21.0, 45.0),
    ChromaWindow("raisin", 25.0, 48.0, -27.0, -1.0),
    ChromaWindow("dry", 0.5, 24.0, 5.0, 30.0),
]
DEFAULT_MIN_AREA = 40
DEFAULT_MORPH_RADIUS = 2


@dataclass
class DetectorSpec:
    kind: str                                  # "external" | "classical"
    predictions_dir: str | None = None         # external
    windows: list[ChromaWindow] = field(default_factory=list)  # classical
    min_area: int = DEFAULT_MIN_AREA
    morph_radius: int = DEFAULT_MORPH_RADIUS

    def __post_init__(self):
        if self.kind not in ("external", "classical"):
            raise ValueError(f"bad detector kind {self.kind!r}")
        if self.kind == "external" and not self.predictions_dir:
            raise ValueError("external detector needs a predictions_dir")
        if self.kind == "classical" and not self.windows:
            raise ValueError("classical detector needs at least one chroma window")
        if self.min_area < 1:
            raise ValueError(f"min_area {self.min_area} < 1")
        if self.morph_radius < 0:
            raise ValueError(f"morph_radius {self.morph_radius} < 0")

    @property
    def stage_names(self) -> list[str]:
        return [w.stage for w in self.windows]


def default_classical_spec() -> DetectorSpec:
    return DetectorSpec(kind="classical", windows=list(DEFAULT_WINDOWS))


def load_detector_spec(path) -> DetectorSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("kind")
    if kind == "external":
        return DetectorSpec(kind="external", predictions_dir=doc.get("predictions_dir"))
    if kind == "classical":
        windows = [ChromaWindow(w["stage"], float(w["a"][0]), float(w["a"][1]),
                                float(w["b"][0]), float(w["b"][1]))
                   for w in doc.get("windows", [])]
        return DetectorSpec(kind="classical", windows=windows,
                            min_area=int(doc.get("min_area", DEFAULT_MIN_AREA)),
                            morph_radius=int(doc.get("morph_radius", DEFAULT_MORPH_RADIUS)))
    raise CoffeeVisionError(f"bad detector config: kind={kind!r}")


def save_detector_spec(path, spec: DetectorSpec) -> None:
    if spec.kind == "external":
        doc = {"kind": "external", "predictions_dir": spec.predictions_dir}
    else:
        doc = {"kind": "classical", "min_area": spec.min_area,
               "morph_radius": spec.morph_radius,
               "windows": [{"stage": w.stage, "a": [w.a_lo, w.a_hi],
                            "b": [w.b_lo, w.b_hi]} for w in spec.windows]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_external(directory, image_id: str) -> PredictionFile:
    """Read one externally produced prediction file from a directory."""
    path = Path(directory) / f"{image_id}.txt"
    if not path.is_file():
        raise MissingPredictions(f"no prediction file for {image_id!r} in {directory}")
    return load_prediction_file(path)


def _disc(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    return (span[:, None] ** 2 + span[None, :] ** 2) <= radius ** 2


def detect_classical(image, spec: DetectorSpec, image_id: str = "") -> PredictionFile:
    """Color-blob detection over a decoded RGB image.

    Per stage window: chroma mask -> morphological open/close -> 4-connected
    components; components of at least min_area pixels become tight normalized
    boxes. Confidence is the fraction of in-window pixels inside the box.
    Output is ordered by each blob's first raster-scan pixel, so identical
    bytes always produce identical predictions.
    """
    if spec.kind != "classical":
        raise ValueError("detect_classical needs a classical DetectorSpec")
    img = np.asarray(image)
    height, width = img.shape[:2]
    lab = srgb_to_lab(img[:, :, :3])
    a_plane, b_plane = lab[:, :, 1], lab[:, :, 2]

    structure = _disc(spec.morph_radius) if spec.morph_radius > 0 else None
    found = []  # (first_row, first_col, stage_index, box, confidence)
    for stage_index, win in enumerate(spec.windows):
        raw = ((a_plane >= win.a_lo) & (a_plane <= win.a_hi)
               & (b_plane >= win.b_lo) & (b_plane <= win.b_hi))
        mask = raw
        if structure is not None:
            mask = ndimage.binary_opening(mask, structure=structure)
            mask = ndimage.binary_closing(mask, structure=structure)
        labeled, n_comp = ndimage.label(mask, structure=_FOUR_CONNECTED)
        if n_comp == 0:
            continue
        sizes = np.bincount(labeled.ravel())
        for comp, slc in enumerate(ndimage.find_objects(labeled), start=1):
            if slc is None or sizes[comp] < spec.min_area:
                continue
            rows, cols = slc
            r0, r1 = rows.start, rows.stop - 1
            c0, c1 = cols.start, cols.stop - 1
            first_col = int(np.flatnonzero(labeled[r0] == comp)[0])
            conf = float(raw[rows, cols].mean())
            box = NormalizedBox(
                category_index=stage_index,
                cx=(c0 + c1 + 1) / 2 / width,
                cy=(r0 + r1 + 1) / 2 / height,
                w=(c1 + 1 - c0) / width,
                h=(r1 + 1 - r0) / height)
            found.append((r0, first_col, stage_index, box, conf))

    found.sort(key=lambda t: (t[0], t[1], t[2]))
    return PredictionFile(image_id=image_id,
                          entries=[Prediction(box=box, confidence=conf)
                                   for _, _, _, box, conf in found])
