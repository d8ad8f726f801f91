"""Douglas-Peucker simplification of closed pixel contours.

Tolerances are snapped to a 1/256 pixel grid (the resolution the container
stores) and all distance tests run on exact integers: a point at distance
``d`` is dropped only if ``d < xi``; a point exactly at ``xi`` is kept.
"""
from __future__ import annotations

import numpy as np

from .maps import InstanceContour

__all__ = ["TOLERANCE_SCALE", "tolerance_fixed", "simplify", "simplify_points"]

TOLERANCE_SCALE = 256
# Beyond this coordinate span the squared cross products overflow int64.
_INT64_SPAN = 2400


def tolerance_fixed(xi: float) -> int:
    """Tolerance in 1/256 pixel units."""
    if not np.isfinite(xi) or xi < 0:
        raise ValueError(f"tolerance must be a finite non-negative number, got {xi}")
    return int(round(xi * TOLERANCE_SCALE))


def _segment_distances(pts, a, b):
    """Squared point-to-segment distances as ``(numerators, denominator)``."""
    ab = b - a
    l2 = int(ab[0] * ab[0] + ab[1] * ab[1])
    ap = pts - a
    d_a = ap[:, 0] * ap[:, 0] + ap[:, 1] * ap[:, 1]
    if l2 == 0:
        return d_a, 1
    t = ap[:, 0] * ab[0] + ap[:, 1] * ab[1]
    cross = ap[:, 0] * ab[1] - ap[:, 1] * ab[0]
    num = cross * cross
    bp = pts - b
    d_b = bp[:, 0] * bp[:, 0] + bp[:, 1] * bp[:, 1]
    num = np.where(t <= 0, d_a * l2, num)
    num = np.where(t >= l2, d_b * l2, num)
    return num, l2


def _dp_keep(pts: np.ndarray, k2: int) -> np.ndarray:
    """Keep mask for an open polyline; endpoints always survive."""
    m = len(pts)
    keep = np.zeros(m, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, m - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        num, den = _segment_distances(pts[i + 1 : j], pts[i], pts[j])
        far = int(np.argmax(num))
        if int(num[far]) * TOLERANCE_SCALE**2 >= k2 * den:
            split = i + 1 + far
            keep[split] = True
            stack.append((split, j))
            stack.append((i, split))
    return keep


def simplify_points(points, xi: float) -> np.ndarray:
    """Simplify a closed contour, returning the surviving subsequence of points.

    The contour is cut at point 0 and at the point farthest from it; each open
    half is simplified separately so both anchors, and with them the start
    point, always survive.  If fewer than three points remain while the input
    has at least three distinct points, the point farthest from the anchor
    chord is restored so the outline still encloses area.
    """
    k = tolerance_fixed(xi)
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if k == 0 or len(pts) < 3 or len(np.unique(pts, axis=0)) < 3:
        return pts.copy()
    if np.ptp(pts, axis=0).max() > _INT64_SPAN:
        pts = pts.astype(object)
    k2 = k * k

    d0 = ((pts - pts[0]) ** 2).sum(axis=1)
    f = int(np.argmax(d0))
    first = pts[: f + 1]
    second = np.concatenate([pts[f:], pts[:1]])
    keep1 = _dp_keep(first, k2)
    keep2 = _dp_keep(second, k2)
    idx = np.concatenate([np.flatnonzero(keep1), f + 1 + np.flatnonzero(keep2[1:-1])])

    if len(idx) < 3:
        num, _ = _segment_distances(pts, pts[0], pts[f])
        num = np.asarray(num)
        num[idx] = -1
        idx = np.sort(np.append(idx, int(np.argmax(num))))
    return np.asarray(pts[idx], dtype=np.int64)


def simplify(contour: InstanceContour, xi: float) -> InstanceContour:
    """Contour with points dropped wherever they deviate less than ``xi`` pixels."""
    pts = simplify_points(contour.points, xi)
    return InstanceContour(contour.label, pts, contour.area, contour.enclosed_area)
