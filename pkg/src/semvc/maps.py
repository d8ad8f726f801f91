"""Semantic maps, instance extraction, boundary tracing and rasterization.

A semantic map is a 2-D ``uint16`` array of class labels indexed ``[row, col]``.
Instances are the 4-connected components of equal label; each one is described
by the clockwise Moore trace of its outer boundary.  Holes are not traced: the
instances filling them are enclosed by a smaller outline and get painted later.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
from scipy import ndimage
from skimage.measure import label as _sk_label

__all__ = [
    "InstanceContour",
    "Components",
    "as_label_map",
    "boundary_mask",
    "label_components",
    "extract_instances",
    "trace_boundary",
    "fill_mask",
    "rasterize",
]

MAX_LABEL = 0xFFFF

# Moore neighbourhood, clockwise in image coordinates: N, NE, E, SE, S, SW, W, NW.
_DR = np.array([-1, -1, 0, 1, 1, 1, 0, -1], dtype=np.int64)
_DC = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
_DIR_INDEX = np.full((3, 3), -1, dtype=np.int64)
for _d in range(8):
    _DIR_INDEX[_DR[_d] + 1, _DC[_d] + 1] = _d
_WEST = 6


def as_label_map(labels) -> np.ndarray:
    """Validate ``labels`` as a semantic map and return it as C-ordered ``uint16``."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"semantic map must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"semantic map must be non-empty, got shape {arr.shape}")
    if arr.dtype == np.uint16:
        return np.ascontiguousarray(arr)
    if arr.dtype.kind not in "iub":
        raise TypeError(f"semantic map labels must be integers, got {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > MAX_LABEL):
        raise ValueError("semantic map labels must lie in [0, 65535]")
    return np.ascontiguousarray(arr, dtype=np.uint16)


@dataclass(frozen=True, eq=False)
class InstanceContour:
    """One instance: class label plus its clockwise boundary points.

    ``points`` is an ``(N, 2)`` int64 array of ``(row, col)``.  ``area`` is the
    pixel count of the component and ``enclosed_area`` the pixel count of the
    region inside its outline (holes included); both are 0 for contours that
    were reconstructed by a decoder rather than traced from a map.
    """

    label: int
    points: np.ndarray
    area: int = 0
    enclosed_area: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not 0 <= int(self.label) <= MAX_LABEL:
            raise ValueError(f"label {self.label} outside [0, 65535]")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def start(self) -> tuple[int, int]:
        return int(self.points[0, 0]), int(self.points[0, 1])

    def translated(self, drow: int, dcol: int) -> InstanceContour:
        return InstanceContour(
            self.label,
            self.points + np.array([drow, dcol], dtype=np.int64),
            self.area,
            self.enclosed_area,
        )

    def same_as(self, other: InstanceContour) -> bool:
        return (
            self.label == other.label
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )


def boundary_mask(labels) -> np.ndarray:
    """Pixels with an 8-neighbour of a different label or outside the frame."""
    m = as_label_map(labels)
    padded = np.pad(m.astype(np.int32), 1, constant_values=-1)
    h, w = m.shape
    out = np.zeros((h, w), dtype=bool)
    for dr, dc in zip(_DR, _DC):
        out |= padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] != m
    return out


@numba.njit(cache=True)
def _moore_trace(mask, r0, c0, dr, dc, dir_index):
    # mask is zero-padded by one pixel; (r0, c0) is the topmost-leftmost set pixel.
    cap = 64
    pts = np.empty((cap, 2), dtype=np.int64)
    pts[0, 0] = r0
    pts[0, 1] = c0
    n = 1
    r = r0
    c = c0
    back = 6
    first_r = -1
    first_c = -1
    while True:
        found = -1
        for k in range(1, 9):
            d = (back + k) % 8
            if mask[r + dr[d], c + dc[d]]:
                found = d
                break
        if found < 0:
            break
        nr = r + dr[found]
        nc = c + dc[found]
        if first_r < 0:
            first_r = nr
            first_c = nc
        elif r == r0 and c == c0 and nr == first_r and nc == first_c:
            break
        prev = (found + 7) % 8
        br = r + dr[prev]
        bc = c + dc[prev]
        back = dir_index[br - nr + 1, bc - nc + 1]
        if n == cap:
            grown = np.empty((cap * 2, 2), dtype=np.int64)
            grown[:cap] = pts
            pts = grown
            cap *= 2
        pts[n, 0] = nr
        pts[n, 1] = nc
        n += 1
        r = nr
        c = nc
    # the walk ends by re-entering the start pixel; drop that duplicate
    if n > 1 and pts[n - 1, 0] == r0 and pts[n - 1, 1] == c0:
        n -= 1
    return pts[:n].copy()


def trace_boundary(mask: np.ndarray) -> np.ndarray:
    """Clockwise Moore trace of the outer boundary of a single-component mask.

    Starts at the lexicographically smallest set pixel and returns ``(N, 2)``
    ``(row, col)`` points; the walk stops when the first move repeats.
    """
    mask = np.asarray(mask, dtype=bool)
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        raise ValueError("cannot trace an empty mask")
    r0, c0 = divmod(int(flat[0]), mask.shape[1])
    padded = np.pad(mask, 1).astype(np.uint8)
    pts = _moore_trace(padded, r0 + 1, c0 + 1, _DR, _DC, _DIR_INDEX)
    return pts - 1


@lru_cache(maxsize=8)
def _index_grids(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.indices((h, w))
    return rows.ravel().astype(np.float64), cols.ravel().astype(np.float64)


@dataclass(eq=False)
class Components:
    """4-connected equal-label components of a map, with exact moment sums.

    Component ``i`` (0-based) carries ``label[i]``, pixel ``count[i]`` and
    integer coordinate sums, so centroids ``sum_row / count`` stay exact.
    """

    ids: np.ndarray
    label: np.ndarray
    count: np.ndarray
    sum_row: np.ndarray
    sum_col: np.ndarray
    _slices: list = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.label)

    @property
    def slices(self) -> list:
        if self._slices is None:
            self._slices = ndimage.find_objects(self.ids)
        return self._slices

    def local_mask(self, i: int) -> tuple[np.ndarray, int, int]:
        sl = self.slices[i]
        return self.ids[sl] == i + 1, sl[0].start, sl[1].start

    def contour(self, i: int) -> InstanceContour:
        local, r0, c0 = self.local_mask(i)
        pts = trace_boundary(local) + np.array([r0, c0], dtype=np.int64)
        enclosed = int(ndimage.binary_fill_holes(local).sum())
        return InstanceContour(int(self.label[i]), pts, int(self.count[i]), enclosed)


def label_components(labels, connectivity: int = 4) -> Components:
    """Split a map into connected components of equal label."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    m = as_label_map(labels)
    h, w = m.shape
    ids = _sk_label(m.astype(np.int32) + 1, connectivity=1 if connectivity == 4 else 2, background=0)
    n = int(ids.max())
    flat = ids.ravel()
    rows, cols = _index_grids(h, w)
    count = np.bincount(flat, minlength=n + 1)[1:]
    lab = np.bincount(flat, weights=m.ravel().astype(np.float64), minlength=n + 1)[1:]
    sr = np.bincount(flat, weights=rows, minlength=n + 1)[1:]
    sc = np.bincount(flat, weights=cols, minlength=n + 1)[1:]
    return Components(
        ids=ids,
        label=np.rint(lab / count).astype(np.int64),
        count=count.astype(np.int64),
        sum_row=np.rint(sr).astype(np.int64),
        sum_col=np.rint(sc).astype(np.int64),
    )


def instance_order_key(c: InstanceContour) -> tuple:
    return (-c.enclosed_area, c.label, c.start)


def extract_instances(labels, connectivity: int = 4) -> list[InstanceContour]:
    """Decompose a map into instance contours.

    Components are labelled with ``connectivity`` and traced with the Moore
    neighbourhood.  The result is ordered by descending enclosed area, ties
    broken by ``(label, start point)``; this is the painting order that makes
    :func:`rasterize` reproduce the map exactly.
    """
    comps = label_components(labels, connectivity)
    out = [comps.contour(i) for i in range(len(comps))]
    out.sort(key=instance_order_key)
    return out


def _outline_pixels(points: np.ndarray) -> np.ndarray:
    """Pixels on the closed polyline through ``points`` (round-half-up DDA)."""
    a = points
    b = np.roll(points, -1, axis=0)
    d = b - a
    steps = np.maximum(np.abs(d).max(axis=1), 1)
    seg = np.repeat(np.arange(len(a)), steps)
    t = np.arange(int(steps.sum())) - np.repeat(np.cumsum(steps) - steps, steps)
    n = steps[seg]
    rr = a[seg, 0] + (2 * d[seg, 0] * t + n) // (2 * n)
    cc = a[seg, 1] + (2 * d[seg, 1] * t + n) // (2 * n)
    return np.stack([rr, cc], axis=1)


def fill_mask(points) -> tuple[np.ndarray, int, int]:
    """Filled region (outline plus interior) of a closed contour.

    Returns ``(mask, row0, col0)`` where ``mask`` covers the contour's bounding
    box offset by ``(row0, col0)``.  Interior = pixels that cannot reach the
    outside through 4-connected moves without crossing the outline.
    """
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("contour has no points")
    line = _outline_pixels(pts)
    lo = line.min(axis=0)
    hi = line.max(axis=0)
    h, w = (hi - lo + 3).tolist()
    grid = np.zeros((h, w), dtype=bool)
    grid[line[:, 0] - lo[0] + 1, line[:, 1] - lo[1] + 1] = True
    free, _ = ndimage.label(~grid)
    filled = free != free[0, 0]
    return filled[1:-1, 1:-1], int(lo[0]), int(lo[1])


def _paint(canvas: np.ndarray, mask: np.ndarray, r0: int, c0: int, value: int) -> None:
    h, w = canvas.shape
    mh, mw = mask.shape
    rs, cs = max(r0, 0), max(c0, 0)
    re, ce = min(r0 + mh, h), min(c0 + mw, w)
    if rs >= re or cs >= ce:
        return
    sub = mask[rs - r0 : re - r0, cs - c0 : ce - c0]
    canvas[rs:re, cs:ce][sub] = value


def rasterize(contours, width: int, height: int, background_label: int = 0) -> np.ndarray:
    """Paint contours into a ``height x width`` map.

    Each contour is filled (outline plus interior).  Fills are painted largest
    first so smaller instances win on overlap; equal sizes keep input order.
    Points outside the frame are clipped here.
    """
    if width < 1 or height < 1:
        raise ValueError("map dimensions must be positive")
    canvas = np.full((height, width), background_label, dtype=np.uint16)
    fills = []
    for c in contours:
        if len(c.points) == 0:
            raise ValueError("degenerate contour with no points")
        mask, r0, c0 = fill_mask(c.points)
        fills.append((int(mask.sum()), mask, r0, c0, c.label))
    order = sorted(range(len(fills)), key=lambda i: -fills[i][0])
    for i in order:
        _, mask, r0, c0, lab = fills[i]
        _paint(canvas, mask, r0, c0, lab)
    return canvas
