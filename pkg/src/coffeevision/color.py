"""Fruit crop extraction and CIELAB chroma features.

A fruit crop is the box region of an image resampled to a fixed 28x28 RGB
patch. Its feature vector is the patch's a* plane followed by its b* plane
(784 + 784 = 1568 values, row-major), with lightness discarded so that shadow
and sunlight variation does not leak into the color clusters.

The RGB -> LAB conversion assumes sRGB primaries, D65 white and the 2-degree
observer; that is the right default for consumer-camera field photos.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import NormalizedBox
from .errors import CoffeeVisionError

PATCH_SIZE = 28
FEATURE_DIM = 2 * PATCH_SIZE * PATCH_SIZE  # a-plane then b-plane

# sRGB -> XYZ (D65). The white point equals the matrix row sums, which keeps
# neutral pixels at a* = b* = 0 up to float noise.
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = np.array([0.95047, 1.00000, 1.08883])
_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


class DegenerateBox(CoffeeVisionError):
    """The denormalized box region is smaller than one pixel."""


class FeatureStoreError(CoffeeVisionError):
    """A feature store file is corrupt or has the wrong layout."""


@dataclass
class AbFeature:
    """Planar a*/b* chroma vector of one fruit crop."""

    values: np.ndarray          # shape (1568,), a-plane then b-plane
    source_image_id: str = ""
    source_box_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (FEATURE_DIM,):
            raise ValueError(f"feature must have {FEATURE_DIM} values, "
                             f"got shape {self.values.shape}")
        if np.any(np.abs(self.values) > 128.0):
            raise ValueError("chroma value outside [-128, 128]")


def load_image(source) -> np.ndarray:
    """Decode a PNG/JPEG path or byte stream to an HxWx3 uint8 RGB array.

    Alpha channels are dropped; palette and grayscale images are expanded.
    """
    from io import BytesIO

    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(BytesIO(source) if isinstance(source, (bytes, bytearray))
                        else source) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as e:
        raise CoffeeVisionError(f"cannot decode image: {e}") from None


def srgb_to_lab(rgb) -> np.ndarray:
    """Vectorized sRGB (0..255) -> CIELAB. Works on any (..., 3) array."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_EPS, np.cbrt(t), (_LAB_KAPPA * t + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def rgb_to_lab(r: float, g: float, b: float) -> tuple[float, float, float]:
    """Convert one 8-bit RGB triple to (L, a, b)."""
    lab = srgb_to_lab(np.array([r, g, b]))
    return float(lab[0]), float(lab[1]), float(lab[2])


def crop_resize(image, box: NormalizedBox) -> np.ndarray:
    """Crop the box region and resample it to a 28x28x3 uint8 patch.

    Sampling is plain bilinear interpolation at output pixel centers, with
    edge clamping; no prefiltering, so results are deterministic and cheap to
    verify by hand.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValueError(f"expected an RGB raster, got shape {img.shape}")
    img = img[:, :, :3].astype(np.float64)
    height, width = img.shape[:2]
    if height < 1 or width < 1:
        raise ValueError("empty image")

    x1, y1, x2, y2 = box.corners()
    x_lo, x_hi = max(x1 * width, 0.0), min(x2 * width, float(width))
    y_lo, y_hi = max(y1 * height, 0.0), min(y2 * height, float(height))
    rw, rh = x_hi - x_lo, y_hi - y_lo
    if rw < 1.0 or rh < 1.0:
        raise DegenerateBox(
            f"box region {rw:.3f}x{rh:.3f} px is smaller than one pixel")

    n = PATCH_SIZE
    sx = np.clip(x_lo + (np.arange(n) + 0.5) * (rw / n) - 0.5, 0, width - 1)
    sy = np.clip(y_lo + (np.arange(n) + 0.5) * (rh / n) - 0.5, 0, height - 1)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1i = np.minimum(x0 + 1, width - 1)
    y1i = np.minimum(y0 + 1, height - 1)
    fx = (sx - x0)[None, :, None]
    fy = (sy - y0)[:, None, None]

    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1i)] * fx
    bot = img[np.ix_(y1i, x0)] * (1 - fx) + img[np.ix_(y1i, x1i)] * fx
    out = top * (1 - fy) + bot * fy
    return np.rint(out).clip(0, 255).astype(np.uint8)


def extract_ab(patch: np.ndarray, image_id: str = "", box_index: int = 0) -> AbFeature:
    """Planar a*/b* vector of a 28x28x3 patch; the L channel is discarded."""
    patch = np.asarray(patch)
    if patch.shape != (PATCH_SIZE, PATCH_SIZE, 3):
        raise ValueError(f"expected a {PATCH_SIZE}x{PATCH_SIZE}x3 patch, "
                         f"got shape {patch.shape}")
    lab = srgb_to_lab(patch)
    values = np.concatenate([lab[:, :, 1].ravel(), lab[:, :, 2].ravel()])
    return AbFeature(values=values, source_image_id=image_id, source_box_index=box_index)


def extract_features(image, boxes, image_id: str = "") -> list[AbFeature]:
    """Crop + extract for every box, in input order.

    Degenerate boxes raise; callers that must tolerate them (batch relabeling
    of noisy field data) catch DegenerateBox per box.
    """
    return [extract_ab(crop_resize(image, box), image_id, i)
            for i, box in enumerate(boxes)]


# ---------------------------------------------------------------------------
# feature store: "ABFT" container with fixed-dim float32 records

_MAGIC = b"ABFT"
_VERSION = 1
_HEADER = struct.Struct("<4sIQI")        # magic, version, count, dim
_REC_FIXED = struct.Struct("<H")         # image_id byte length
_REC_INDEX = struct.Struct("<I")         # box index


def save_features(path, features: list[AbFeature]) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, _VERSION, len(features), FEATURE_DIM))
        for feat in features:
            ident = feat.source_image_id.encode("utf-8")
            if len(ident) > 0xFFFF:
                raise FeatureStoreError("image id longer than 65535 bytes")
            f.write(_REC_FIXED.pack(len(ident)))
            f.write(ident)
            f.write(_REC_INDEX.pack(feat.source_box_index))
            f.write(feat.values.astype("<f4").tobytes())


def load_features(path) -> list[AbFeature]:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FeatureStoreError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise FeatureStoreError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FeatureStoreError(f"{path}: unsupported version {version}")
    if dim != FEATURE_DIM:
        raise FeatureStoreError(f"{path}: dim {dim} != {FEATURE_DIM}")
    offset = _HEADER.size
    features = []
    vec_bytes = FEATURE_DIM * 4
    for _ in range(count):
        try:
            (id_len,) = _REC_FIXED.unpack_from(data, offset)
            offset += _REC_FIXED.size
            ident = data[offset:offset + id_len].decode("utf-8")
            offset += id_len
            (box_index,) = _REC_INDEX.unpack_from(data, offset)
            offset += _REC_INDEX.size
            vec = np.frombuffer(data, dtype="<f4", count=FEATURE_DIM, offset=offset)
            offset += vec_bytes
        except (struct.error, ValueError) as e:
            raise FeatureStoreError(f"{path}: truncated record ({e})") from None
        features.append(AbFeature(values=vec.astype(np.float64),
                                  source_image_id=ident, source_box_index=box_index))
    return features
