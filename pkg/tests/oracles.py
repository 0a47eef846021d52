"""Independent brute-force oracles the implementation is checked against.

Everything here is deliberately slow, pure-Python and written from the
definitions, sharing no code path with the package: greedy matching and
PR-curve enumeration for AP/mAP, flood-fill connected components, scalar
bilinear sampling, and exhaustive two-cluster partitioning.
"""

from __future__ import annotations

import itertools
import math


def iou_xyxy(a, b) -> float:
    """IoU from two (x1, y1, x2, y2) corner tuples."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _corners(box) -> tuple[float, float, float, float]:
    cat, cx, cy, w, h = box
    return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def greedy_match(preds, gts, iou_threshold):
    """Match one image+category: preds are (conf, box5), gts are box5 tuples.

    Returns a list of (confidence, is_tp) in descending-confidence order,
    mirroring the documented convention: stable sort by confidence, each
    prediction claims the unmatched ground truth with the highest IoU at or
    above the threshold, IoU ties going to the lowest ground-truth index.
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i][0])
    taken = [False] * len(gts)
    flags = []
    for i in order:
        conf, box = preds[i]
        best_iou, best_j = -1.0, None
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou_xyxy(_corners(box), _corners(gt))
            if v >= iou_threshold and v > best_iou:
                best_iou, best_j = v, j
        if best_j is None:
            flags.append((conf, False))
        else:
            taken[best_j] = True
            flags.append((conf, True))
    return flags


def pr_envelope_ap(flags, gt_count):
    """AP by explicit PR-point enumeration and suffix-max envelope integration.

    flags: (confidence, is_tp) pairs in any order. Returns None when the
    category is undefined (no ground truth, no predictions).
    """
    if gt_count == 0:
        return None if not flags else 0.0
    if not flags:
        return 0.0
    ordered = sorted(flags, key=lambda f: -f[0])
    tp = 0
    precisions, recalls = [], []
    for i, (_, is_tp) in enumerate(ordered, start=1):
        if is_tp:
            tp += 1
        precisions.append(tp / i)
        recalls.append(tp / gt_count)
    envelope = []
    best = 0.0
    for p in reversed(precisions):
        best = max(best, p)
        envelope.append(best)
    envelope.reverse()
    ap = 0.0
    prev_recall = 0.0
    for r, e in zip(recalls, envelope):
        if r > prev_recall:
            ap += (r - prev_recall) * e
            prev_recall = r
    return ap


def brute_force_map(preds_by_image, gts_by_image, iou_threshold, n_categories):
    """Per-category AP dict and mAP@threshold, fully independently computed.

    preds_by_image: {image_id: [(conf, (cat, cx, cy, w, h)), ...]}
    gts_by_image:   {image_id: [(cat, cx, cy, w, h), ...]}
    """
    aps = {}
    for cat in range(n_categories):
        pooled = []
        gt_total = 0
        for image_id in sorted(set(preds_by_image) | set(gts_by_image)):
            preds = [(c, b) for c, b in preds_by_image.get(image_id, [])
                     if b[0] == cat]
            gts = [b for b in gts_by_image.get(image_id, []) if b[0] == cat]
            pooled.extend(greedy_match(preds, gts, iou_threshold))
            gt_total += len(gts)
        aps[cat] = pr_envelope_ap(pooled, gt_total)
    defined = [v for v in aps.values() if v is not None]
    mean_ap = sum(defined) / len(defined) if defined else None
    return aps, mean_ap


def bilinear_sample(image, sx: float, sy: float):
    """Scalar bilinear lookup with edge clamping; image is HxWxC."""
    height, width = image.shape[:2]
    sx = min(max(sx, 0.0), width - 1.0)
    sy = min(max(sy, 0.0), height - 1.0)
    x0, y0 = int(math.floor(sx)), int(math.floor(sy))
    x1, y1 = min(x0 + 1, width - 1), min(y0 + 1, height - 1)
    fx, fy = sx - x0, sy - y0
    out = []
    for ch in range(image.shape[2]):
        a = float(image[y0, x0, ch])
        b = float(image[y0, x1, ch])
        c = float(image[y1, x0, ch])
        d = float(image[y1, x1, ch])
        out.append(a * (1 - fx) * (1 - fy) + b * fx * (1 - fy)
                   + c * (1 - fx) * fy + d * fx * fy)
    return out


def crop_resize_reference(image, corners, out_size: int = 28):
    """Pure-Python reference for the crop+bilinear-resize contract."""
    height, width = image.shape[:2]
    x1, y1, x2, y2 = corners
    x_lo, x_hi = max(x1 * width, 0.0), min(x2 * width, float(width))
    y_lo, y_hi = max(y1 * height, 0.0), min(y2 * height, float(height))
    rw, rh = x_hi - x_lo, y_hi - y_lo
    patch = []
    for r in range(out_size):
        row = []
        for c in range(out_size):
            sx = x_lo + (c + 0.5) * (rw / out_size) - 0.5
            sy = y_lo + (r + 0.5) * (rh / out_size) - 0.5
            row.append(bilinear_sample(image, sx, sy))
        patch.append(row)
    return patch


def flood_components(mask, connectivity: int = 4):
    """Connected components of a boolean 2-D mask via BFS flood fill."""
    height, width = mask.shape
    seen = [[False] * width for _ in range(height)]
    if connectivity == 4:
        steps = ((1, 0), (-1, 0), (0, 1), (0, -1))
    else:
        steps = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                      if (dr, dc) != (0, 0))
    components = []
    for r in range(height):
        for c in range(width):
            if not mask[r, c] or seen[r][c]:
                continue
            queue = [(r, c)]
            seen[r][c] = True
            pixels = []
            while queue:
                pr, pc = queue.pop()
                pixels.append((pr, pc))
                for dr, dc in steps:
                    nr, nc = pr + dr, pc + dc
                    if (0 <= nr < height and 0 <= nc < width
                            and mask[nr, nc] and not seen[nr][nc]):
                        seen[nr][nc] = True
                        queue.append((nr, nc))
            components.append(pixels)
    return components


def exhaustive_two_means(points):
    """Minimum k=2 inertia over every assignment of points to two clusters.

    points: list of equal-length numeric tuples/lists. Returns (inertia,
    frozenset of one side's indices). Only feasible for tiny n.
    """
    n = len(points)
    dim = len(points[0])
    best = (math.inf, None)
    for bits in range(1, 2 ** n - 1):
        groups = ([], [])
        for i in range(n):
            groups[(bits >> i) & 1].append(points[i])
        inertia = 0.0
        for group in groups:
            mean = [sum(p[d] for p in group) / len(group) for d in range(dim)]
            inertia += sum(sum((p[d] - mean[d]) ** 2 for d in range(dim))
                           for p in group)
        if inertia < best[0]:
            best = (inertia, frozenset(i for i in range(n) if (bits >> i) & 1))
    return best
