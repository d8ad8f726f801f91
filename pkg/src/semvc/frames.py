"""Intra contour coding and inter-frame instance motion.

I-frames carry each simplified contour as a start point plus per-axis
increments, uniformly quantized to at most ``q`` levels.  P-frames carry one
integer translation per instance: the ceiling of its centroid shift.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .maps import Components, InstanceContour, as_label_map, fill_mask, instance_order_key, label_components

__all__ = [
    "DifferentialContour",
    "QuantizedContour",
    "MotionRecord",
    "MotionEstimate",
    "Moment",
    "diff_encode",
    "quantize_deltas",
    "dequantize_and_sum",
    "axis_alphabet",
    "quantize_axis",
    "dequantize_axis",
    "estimate_motion",
    "match_instances",
    "motion_vector",
    "apply_motion",
]


@dataclass(frozen=True, eq=False)
class DifferentialContour:
    label: int
    start: tuple[int, int]
    deltas: np.ndarray

    def __len__(self) -> int:
        return len(self.deltas) + 1


@dataclass(frozen=True, eq=False)
class QuantizedContour:
    label: int
    start: tuple[int, int]
    delta_min: tuple[int, int]
    delta_max: tuple[int, int]
    symbols_row: np.ndarray
    symbols_col: np.ndarray

    @property
    def point_count(self) -> int:
        return len(self.symbols_row) + 1


@dataclass(frozen=True)
class MotionRecord:
    label: int
    instance_index: int
    v: tuple[int, int]


@dataclass
class MotionEstimate:
    """Matched motion plus the instances left over on either side."""

    records: list[MotionRecord]
    unmatched_prev: list[int]
    unmatched_cur: list[InstanceContour] = field(default_factory=list)


def diff_encode(contour: InstanceContour) -> DifferentialContour:
    pts = contour.points
    if len(pts) == 0:
        raise ValueError("contour has no points")
    return DifferentialContour(contour.label, contour.start, np.diff(pts, axis=0))


def axis_alphabet(lo: int, hi: int, q: int) -> int:
    """Number of symbols actually used for deltas spanning ``[lo, hi]``."""
    return min(hi - lo + 1, q)


def quantize_axis(deltas: np.ndarray, lo: int, hi: int, q: int) -> np.ndarray:
    span = hi - lo
    d = np.asarray(deltas, dtype=np.int64) - lo
    if span + 1 <= q:
        return d
    # round half up of d * (q - 1) / span
    return (2 * d * (q - 1) + span) // (2 * span)


def dequantize_axis(symbols: np.ndarray, lo: int, hi: int, q: int) -> np.ndarray:
    span = hi - lo
    s = np.asarray(symbols, dtype=np.int64)
    if span + 1 <= q:
        return s + lo
    return lo + (2 * s * span + (q - 1)) // (2 * (q - 1))


def quantize_deltas(d: DifferentialContour, q: int) -> QuantizedContour:
    """Uniform per-axis quantization of contour increments.

    An axis whose increments take at most ``q`` distinct integer values is
    shifted losslessly; otherwise ``q`` levels are spread evenly between the
    observed extremes.
    """
    if q < 2:
        raise ValueError("quantizer needs at least 2 symbols")
    deltas = np.asarray(d.deltas, dtype=np.int64).reshape(-1, 2)
    if len(deltas):
        lo = deltas.min(axis=0)
        hi = deltas.max(axis=0)
    else:
        lo = hi = np.zeros(2, dtype=np.int64)
    rows = quantize_axis(deltas[:, 0], int(lo[0]), int(hi[0]), q)
    cols = quantize_axis(deltas[:, 1], int(lo[1]), int(hi[1]), q)
    return QuantizedContour(
        d.label, d.start, (int(lo[0]), int(lo[1])), (int(hi[0]), int(hi[1])), rows, cols
    )


def dequantize_and_sum(qc: QuantizedContour, q: int) -> InstanceContour:
    """Rebuild contour points from the start point and dequantized increments."""
    dr = dequantize_axis(qc.symbols_row, qc.delta_min[0], qc.delta_max[0], q)
    dc = dequantize_axis(qc.symbols_col, qc.delta_min[1], qc.delta_max[1], q)
    steps = np.stack([dr, dc], axis=1).reshape(-1, 2)
    start = np.array(qc.start, dtype=np.int64)
    pts = np.concatenate([start[None, :], start + np.cumsum(steps, axis=0)])
    return InstanceContour(qc.label, pts)


@dataclass(frozen=True)
class Moment:
    """Exact centroid of a pixel set: ``(sum_row / count, sum_col / count)``."""

    label: int
    count: int
    sum_row: int
    sum_col: int

    @property
    def centroid(self) -> tuple[float, float]:
        return self.sum_row / self.count, self.sum_col / self.count


def _ceil_div(num: int, den: int) -> int:
    return -((-num) // den)


def motion_vector(prev: Moment, cur: Moment) -> tuple[int, int]:
    """Componentwise ceiling of the centroid shift, computed exactly."""
    den = prev.count * cur.count
    dr = _ceil_div(cur.sum_row * prev.count - prev.sum_row * cur.count, den)
    dc = _ceil_div(cur.sum_col * prev.count - prev.sum_col * cur.count, den)
    return dr, dc


def component_moments(comps: Components) -> list[Moment]:
    return [
        Moment(int(comps.label[i]), int(comps.count[i]), int(comps.sum_row[i]), int(comps.sum_col[i]))
        for i in range(len(comps))
    ]


def match_instances(prev: list[Moment], cur: list[Moment]) -> list[tuple[int, int]]:
    """Greedy same-label nearest-centroid assignment.

    Candidate pairs are taken in ascending centroid distance, ties broken by
    previous then current index; each instance is used at most once.
    Returns ``(prev_index, cur_index)`` pairs in previous-index order.
    """
    by_label: dict[int, list[int]] = {}
    for j, m in enumerate(cur):
        by_label.setdefault(m.label, []).append(j)
    pairs = []
    for i, p in enumerate(prev):
        cands = by_label.get(p.label)
        if not cands:
            continue
        # squared distance as an exact rational, so ties resolve by index only
        for j in cands:
            c = cur[j]
            dr = Fraction(c.sum_row, c.count) - Fraction(p.sum_row, p.count)
            dc = Fraction(c.sum_col, c.count) - Fraction(p.sum_col, p.count)
            pairs.append((dr * dr + dc * dc, i, j))
    pairs.sort()
    used_prev: set[int] = set()
    used_cur: set[int] = set()
    matches = []
    for _, i, j in pairs:
        if i in used_prev or j in used_cur:
            continue
        used_prev.add(i)
        used_cur.add(j)
        matches.append((i, j))
    matches.sort()
    return matches


def contour_moment(labels: np.ndarray, contour: InstanceContour, comps: Components) -> Moment:
    """Moment of the map region an instance refers to.

    Uses the component under the contour's start pixel when it carries the
    instance label, else the in-frame part of the contour's filled region.
    """
    h, w = labels.shape
    r, c = contour.start
    if 0 <= r < h and 0 <= c < w and labels[r, c] == contour.label:
        i = int(comps.ids[r, c]) - 1
        return Moment(contour.label, int(comps.count[i]), int(comps.sum_row[i]), int(comps.sum_col[i]))
    mask, r0, c0 = fill_mask(contour.points)
    rr, cc = np.nonzero(mask)
    rr = rr + r0
    cc = cc + c0
    inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    rr, cc = rr[inside], cc[inside]
    if rr.size == 0:
        rr, cc = np.nonzero(mask)
        rr, cc = rr + r0, cc + c0
    return Moment(contour.label, int(rr.size), int(rr.sum()), int(cc.sum()))


def estimate_motion(prev, cur, prev_instances) -> MotionEstimate:
    """Per-instance translation between two ground-truth maps.

    ``prev_instances`` are instances of ``prev`` (as from
    :func:`~semvc.maps.extract_instances`).  Each is matched to a component of
    ``cur`` with the same label by nearest centroid; its motion is the
    componentwise ceiling of the centroid shift.
    """
    prev = as_label_map(prev)
    cur = as_label_map(cur)
    if prev.shape != cur.shape:
        raise ValueError(f"map size mismatch: {prev.shape} vs {cur.shape}")
    prev_comps = label_components(prev)
    cur_comps = label_components(cur)
    prev_m = [contour_moment(prev, c, prev_comps) for c in prev_instances]
    cur_m = component_moments(cur_comps)
    matches = match_instances(prev_m, cur_m)
    records = [
        MotionRecord(prev_m[i].label, i, motion_vector(prev_m[i], cur_m[j])) for i, j in matches
    ]
    matched_prev = {i for i, _ in matches}
    matched_cur = {j for _, j in matches}
    leftover = [cur_comps.contour(j) for j in range(len(cur_m)) if j not in matched_cur]
    leftover.sort(key=instance_order_key)
    return MotionEstimate(
        records,
        [i for i in range(len(prev_m)) if i not in matched_prev],
        leftover,
    )


def apply_motion(instances, records) -> list[InstanceContour]:
    """Translate the referenced instances; unreferenced ones stay put."""
    out = list(instances)
    seen = set()
    for rec in records:
        i = rec.instance_index
        if not 0 <= i < len(out):
            raise IndexError(f"motion record references instance {i} of {len(out)}")
        if i in seen:
            raise ValueError(f"instance {i} moved twice in one frame")
        seen.add(i)
        out[i] = out[i].translated(*rec.v)
    return out
