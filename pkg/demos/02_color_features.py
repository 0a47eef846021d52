"""
Fruit crops and a*/b* chroma features
=====================================

Every annotated box becomes a 28x28 crop, converted to CIELAB; the lightness
channel is dropped so shadow and sunlight differences stop mattering, and the
a*/b* planes become a 1568-value feature vector. This shows why that works:
two gray levels land on the same feature, while green and red land far apart.
"""

import tempfile
from pathlib import Path

import numpy as np

from coffeevision import crop_resize, extract_ab, rgb_to_lab
from coffeevision.annotations import NormalizedBox
from coffeevision.color import load_features, save_features

print("colorimetry sanity:")
for name, rgb in [("white", (255, 255, 255)), ("black", (0, 0, 0)),
                  ("sRGB red", (255, 0, 0)), ("sRGB green", (0, 255, 0))]:
    L, a, b = rgb_to_lab(*rgb)
    print(f"  {name:10s} -> L={L:7.2f}  a*={a:7.2f}  b*={b:7.2f}")

# --- lightness invariance -----------------------------------------------------
dim = np.full((40, 40, 3), 90, dtype=np.uint8)    # dark gray "shadowed" region
lit = np.full((40, 40, 3), 210, dtype=np.uint8)   # bright gray "sunlit" region
box = NormalizedBox(0, 0.5, 0.5, 0.8, 0.8)
f_dim = extract_ab(crop_resize(dim, box))
f_lit = extract_ab(crop_resize(lit, box))
print(f"\nshadow vs sunlight (gray 90 vs 210): max feature difference "
      f"{np.abs(f_dim.values - f_lit.values).max():.4f}")

# --- chroma separation ---------------------------------------------------------
green = np.full((40, 40, 3), (45, 140, 55), dtype=np.uint8)
red = np.full((40, 40, 3), (185, 30, 45), dtype=np.uint8)
f_green = extract_ab(crop_resize(green, box))
f_red = extract_ab(crop_resize(red, box))
print(f"green vs red berry color: feature distance "
      f"{np.linalg.norm(f_green.values - f_red.values):.1f}")

# --- the feature store ----------------------------------------------------------
store = Path(tempfile.mkdtemp(prefix="coffeevision-demo-")) / "features.abft"
save_features(store, [f_dim, f_lit, f_green, f_red])
loaded = load_features(store)
print(f"\nstored and reloaded {len(loaded)} features from {store.name} "
      f"({store.stat().st_size} bytes)")
