"""Reading and writing semantic map sequences: SMR1 raw files and indexed PNGs.

SMR1 layout (little-endian)::

    "SMR1" | width u16 | height u16 | frame_count u32 | label_width u8 (1 or 2)
    | frame_count * height * width labels, row-major
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .maps import as_label_map

__all__ = ["SMR_MAGIC", "read_smr", "write_smr", "read_png_dir", "write_png_dir", "read_maps", "write_maps"]

SMR_MAGIC = b"SMR1"
_SMR_HEAD = struct.Struct("<4sHHIB")


def write_smr(path, frames) -> None:
    frames = [as_label_map(f) for f in frames]
    if not frames:
        raise ValueError("no frames to write")
    h, w = frames[0].shape
    if any(f.shape != (h, w) for f in frames):
        raise ValueError("frames differ in size")
    if w > 0xFFFF or h > 0xFFFF:
        raise ValueError("frame too large for SMR1")
    wide = any(int(f.max()) > 0xFF for f in frames)
    dtype = np.dtype("<u2") if wide else np.dtype("u1")
    with open(path, "wb") as fh:
        fh.write(_SMR_HEAD.pack(SMR_MAGIC, w, h, len(frames), dtype.itemsize))
        for f in frames:
            fh.write(f.astype(dtype).tobytes())


def read_smr(path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _SMR_HEAD.size:
        raise ValueError(f"{path}: too short for an SMR1 header")
    magic, w, h, n, lw = _SMR_HEAD.unpack_from(data)
    if magic != SMR_MAGIC:
        raise ValueError(f"{path}: not an SMR1 file")
    if lw not in (1, 2):
        raise ValueError(f"{path}: label width {lw} not in {{1, 2}}")
    if w < 1 or h < 1:
        raise ValueError(f"{path}: empty frame size")
    expected = _SMR_HEAD.size + n * w * h * lw
    if len(data) != expected:
        raise ValueError(f"{path}: size {len(data)} does not match header ({expected} bytes)")
    dtype = np.dtype("<u2") if lw == 2 else np.dtype("u1")
    flat = np.frombuffer(data, dtype=dtype, offset=_SMR_HEAD.size)
    return [f.astype(np.uint16) for f in flat.reshape(n, h, w)]


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        # for mode P numpy sees the palette indices, not the colours
        if im.mode in ("P", "L"):
            return np.array(im).astype(np.uint16)
        if im.mode in ("I;16", "I;16L", "I"):
            return as_label_map(np.array(im))
        raise ValueError(f"{path}: mode {im.mode} is not a single-channel label image")


def read_png_dir(path) -> list[np.ndarray]:
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise ValueError(f"{path}: no PNG frames")
    frames = [_read_png(p) for p in files]
    if any(f.shape != frames[0].shape for f in frames):
        raise ValueError(f"{path}: PNG frames differ in size")
    return frames


def write_png_dir(path, frames) -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(len(frames))))
    for k, f in enumerate(frames):
        f = as_label_map(f)
        # uint8 arrays become mode L, uint16 arrays mode I;16
        im = Image.fromarray(f.astype(np.uint8) if int(f.max()) <= 0xFF else f)
        im.save(out / f"{k:0{digits}d}.png")


def read_maps(path) -> list[np.ndarray]:
    """Read an SMR1 file or a directory of PNG frames."""
    p = Path(path)
    if p.is_dir():
        return read_png_dir(p)
    return read_smr(p)


def write_maps(path, frames, fmt: str = "smr") -> None:
    if fmt == "smr":
        write_smr(path, frames)
    elif fmt == "png":
        write_png_dir(path, frames)
    else:
        raise ValueError(f"unknown map format {fmt!r}")
