"""Semantic fidelity and rate metrics, and rate-distortion sweeps."""
from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codec import CodecConfig, decode_video, encode_video
from .maps import as_label_map

__all__ = [
    "RdPoint",
    "VideoResult",
    "miou",
    "per_class_iou",
    "bpp",
    "kbps",
    "evaluate_video",
    "rd_sweep",
    "rd_points_to_csv",
    "CSV_FIELDS",
    "DEFAULT_FPS",
]

DEFAULT_FPS = 10.0
CSV_FIELDS = ("xi", "q", "p", "total_bits", "bpp", "kbps", "miou")


def per_class_iou(pred, gt, ignore_label: int | None = None) -> dict[int, float]:
    """IoU for every class present in either map (empty unions skipped)."""
    a = as_label_map(pred)
    b = as_label_map(gt)
    if a.shape != b.shape:
        raise ValueError(f"map size mismatch: {a.shape} vs {b.shape}")
    a = a.ravel().astype(np.int64)
    b = b.ravel().astype(np.int64)
    n = 1 << 16
    pa = np.bincount(a, minlength=n)
    pb = np.bincount(b, minlength=n)
    inter = np.bincount(a[a == b], minlength=n)
    union = pa + pb - inter
    classes = np.flatnonzero(union)
    if ignore_label is not None:
        classes = classes[classes != ignore_label]
    return {int(c): float(inter[c] / union[c]) for c in classes}


def miou(pred, gt, ignore_label: int | None = None) -> float:
    """Unweighted mean IoU over classes present in either map."""
    ious = per_class_iou(pred, gt, ignore_label)
    if not ious:
        return 1.0
    return float(np.mean(list(ious.values())))


def bpp(total_bits: int, width: int, height: int, frame_count: int) -> float:
    if width <= 0 or height <= 0 or frame_count <= 0:
        raise ValueError("dimensions and frame count must be positive")
    return total_bits / (width * height * frame_count)


def kbps(total_bits: int, frame_count: int, fps: float = DEFAULT_FPS) -> float:
    """Kilobits (1024 bits) per second at ``fps``."""
    if frame_count <= 0 or fps <= 0:
        raise ValueError("frame count and fps must be positive")
    return total_bits * fps / (frame_count * 1024)


@dataclass(frozen=True)
class RdPoint:
    xi: float
    q: int
    p: int
    total_bits: int
    bpp: float
    kbps: float
    miou: float


@dataclass(frozen=True)
class VideoResult:
    total_bits: int
    pixels: int
    frames: int
    miou: float
    frame_miou: tuple[float, ...]


def evaluate_video(frames, cfg: CodecConfig, ignore_label: int | None = None) -> VideoResult:
    """Encode, decode and score one video; mIoU is the mean over frames."""
    ev = encode_video(frames, cfg)
    decoded = decode_video(ev)
    scores = tuple(miou(d, f, ignore_label) for d, f in zip(decoded, frames))
    h, w = decoded[0].shape
    return VideoResult(ev.total_bits, h * w * len(frames), len(frames), float(np.mean(scores)), scores)


def _evaluate_job(job):
    vi, frames, cfg, ignore_label = job
    try:
        return evaluate_video(frames, cfg, ignore_label)
    except Exception as exc:
        raise RuntimeError(f"video {vi} with {cfg}: {exc}") from exc


def rd_sweep(
    corpus,
    xi_values,
    q_values=(256,),
    p_values=(4,),
    fps: float = DEFAULT_FPS,
    ignore_label: int | None = None,
    base: CodecConfig | None = None,
    workers: int = 1,
) -> list[RdPoint]:
    """Rate-distortion points for every ``(xi, q, p)`` on the grid.

    Bits are pooled over the corpus, so ``bpp`` is the mean bits per pixel when
    the videos share a size; ``miou`` averages per-video means.  Points come
    back sorted by ``(q, p, xi)``.
    """
    corpus = [list(v) for v in corpus]
    if not corpus:
        raise ValueError("empty corpus")
    base = base or CodecConfig()
    grid = sorted(itertools.product(q_values, p_values, xi_values))
    if not grid:
        raise ValueError("empty parameter grid")
    configs = [
        CodecConfig(xi, q, p, base.background_label, base.pframe_mode) for q, p, xi in grid
    ]
    jobs = [(vi, v, cfg, ignore_label) for cfg in configs for vi, v in enumerate(corpus)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_evaluate_job, jobs, chunksize=1))
    else:
        results = [_evaluate_job(j) for j in jobs]

    points = []
    for ci, cfg in enumerate(configs):
        chunk = results[ci * len(corpus) : (ci + 1) * len(corpus)]
        bits = sum(r.total_bits for r in chunk)
        pixels = sum(r.pixels for r in chunk)
        frames = sum(r.frames for r in chunk)
        points.append(
            RdPoint(
                xi=cfg.xi,
                q=cfg.q,
                p=cfg.p,
                total_bits=bits,
                bpp=bits / pixels,
                kbps=kbps(bits, frames, fps),
                miou=float(np.mean([r.miou for r in chunk])),
            )
        )
    return points


def rd_points_to_csv(points, out=None) -> str:
    """Serialize points as CSV (header row, six decimals); also writes to ``out`` if given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for pt in points:
        writer.writerow(
            [f"{pt.xi:.6f}", pt.q, pt.p, pt.total_bits, f"{pt.bpp:.6f}", f"{pt.kbps:.6f}", f"{pt.miou:.6f}"]
        )
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
