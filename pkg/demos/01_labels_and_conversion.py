"""
Label files and Label Studio conversion
=======================================

YOLO-format label text is the canonical annotation format: one box per line,
``category cx cy w h``, everything normalized by image size. This walkthrough
parses, serializes and converts a small Label Studio rectangle export.
"""

import json
import tempfile
from pathlib import Path

from coffeevision import (convert_labelstudio, parse_yolo_label,
                          serialize_yolo_label)
from coffeevision.annotations import read_names, save_label_file, write_names

work = Path(tempfile.mkdtemp(prefix="coffeevision-demo-"))
print(f"working in {work}\n")

# --- parse and serialize ----------------------------------------------------
text = """\
0 0.500000 0.500000 0.200000 0.200000
2 0.250000 0.750000 0.100000 0.150000
"""
label = parse_yolo_label(text, image_id="branch_001")
print(f"parsed {len(label.boxes)} boxes from branch_001:")
for box in label.boxes:
    print(f"  category {box.category_index} at ({box.cx}, {box.cy}), "
          f"{box.w} x {box.h}")

assert serialize_yolo_label(label) == text   # byte-exact round trip
print("serialize(parse(text)) reproduces the file byte for byte\n")

# --- convert a Label Studio JSON-MIN export ----------------------------------
export = [
    {"image": "/data/upload/7/ab12cd-branch_050.jpg",
     "label": [
         {"x": 10.0, "y": 12.0, "width": 8.0, "height": 9.0,
          "rectanglelabels": ["green"]},
         {"x": 40.0, "y": 35.0, "width": 7.5, "height": 7.0,
          "rectanglelabels": ["cherry"]},
     ]},
    {"image": "/data/upload/7/ef34gh-branch_051.jpg",
     "label": [
         {"x": 61.0, "y": 20.0, "width": 6.0, "height": 6.5,
          "rectanglelabels": ["cherry"]},
     ]},
]
files = convert_labelstudio(json.dumps(export))
labels_dir = work / "labels"
labels_dir.mkdir()
for lf in files:
    path = save_label_file(labels_dir, lf)
    print(f"wrote {path.name}: {len(lf.boxes)} boxes")
write_names(labels_dir / "names.txt", files[0].category_names)
print(f"category names (first-seen order): {read_names(labels_dir / 'names.txt')}")
# image ids keep the uploaded filename's full stem (hash prefix included)
print((labels_dir / "ab12cd-branch_050.txt").read_text())
