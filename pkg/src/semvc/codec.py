"""IP-frame semantic video encoder/decoder and the ``.svc1`` container.

Container layout (all integers little-endian)::

    "SVC1" | version u8 | width u16 | height u16 | frame_count u32
    | xi u16 (1/256 px) | q u16 (0 means 65536) | p u8 | background u16
    | pframe_mode u8
    then per frame: type u8 | payload_length u32 | payload

I-frame payload: ``varint n`` then ``n`` instance records::

    label u16 | point_count varint | start_row u16 | start_col u16
    | row_min i16 | row_max i16 | col_min i16 | col_max i16
    | row symbol stream | col symbol stream

A symbol stream is a range-coded run of ``point_count - 1`` symbols over
``min(max - min + 1, q)`` letters; it is omitted when that is a single letter
or there are no increments.

P-frame payload: ``varint n`` move records (``instance_index varint | label
u16``), then if ``n > 0`` the motion ranges ``row_min i16 | row_max i16 |
col_min i16 | col_max i16`` and the row and column motion streams (motion
minus range minimum, same omission rule).  Extended mode appends
``varint r`` removed instance indices and ``varint a`` intra instance
records for instances that appeared.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .binio import FormatError, Reader, Writer
from .entropy import EntropyDecodeError, decode_stream, encode_symbols
from .frames import (
    Moment,
    MotionRecord,
    QuantizedContour,
    apply_motion,
    axis_alphabet,
    component_moments,
    dequantize_and_sum,
    diff_encode,
    match_instances,
    motion_vector,
    quantize_deltas,
)
from .maps import InstanceContour, as_label_map, instance_order_key, label_components, rasterize
from .simplify import TOLERANCE_SCALE, simplify, tolerance_fixed

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "HEADER_BYTES",
    "FRAME_HEADER_BYTES",
    "FrameType",
    "CodecConfig",
    "CodecError",
    "VideoHeader",
    "EncodedFrame",
    "EncodedVideo",
    "Encoder",
    "Decoder",
    "encode_video",
    "decode_video",
    "coded_size_bits",
]

MAGIC = b"SVC1"
FORMAT_VERSION = 1
HEADER_BYTES = 21
FRAME_HEADER_BYTES = 5
MAX_DIMENSION = 32767
PFRAME_MODES = ("strict", "extended")


class FrameType(enum.IntEnum):
    I = 0  # noqa: E741
    P = 1


class CodecError(ValueError):
    """Malformed stream; ``frame_index`` is None for container-level faults."""

    def __init__(self, message: str, frame_index: int | None = None):
        self.frame_index = frame_index
        where = "header" if frame_index is None else f"frame {frame_index}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class CodecConfig:
    xi: float = 6.0
    q: int = 256
    p: int = 4
    background_label: int = 0
    pframe_mode: str = "strict"

    def __post_init__(self):
        if tolerance_fixed(self.xi) > 0xFFFF:
            raise ValueError("xi must be below 256 pixels")
        if not 2 <= self.q <= 65536:
            raise ValueError("q must lie in [2, 65536]")
        if not 1 <= self.p <= 255:
            raise ValueError("p must lie in [1, 255]")
        if not 0 <= self.background_label <= 0xFFFF:
            raise ValueError("background_label must fit in 16 bits")
        if self.pframe_mode not in PFRAME_MODES:
            raise ValueError(f"pframe_mode must be one of {PFRAME_MODES}")

    def frame_type(self, k: int) -> FrameType:
        return FrameType.I if k % self.p == 0 else FrameType.P


@dataclass(frozen=True)
class VideoHeader:
    width: int
    height: int
    frame_count: int
    config: CodecConfig
    version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(MAGIC)
        w.u8(self.version)
        w.u16(self.width)
        w.u16(self.height)
        w.u32(self.frame_count)
        w.u16(tolerance_fixed(self.config.xi))
        w.u16(self.config.q & 0xFFFF)
        w.u8(self.config.p)
        w.u16(self.config.background_label)
        w.u8(PFRAME_MODES.index(self.config.pframe_mode))
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> VideoHeader:
        try:
            if r.raw(4) != MAGIC:
                raise CodecError("bad magic, not an SVC1 stream")
            version = r.u8()
            if version != FORMAT_VERSION:
                raise CodecError(f"unsupported format version {version}")
            width, height, count = r.u16(), r.u16(), r.u32()
            xi, q, p, bg, mode = r.u16(), r.u16(), r.u8(), r.u16(), r.u8()
            if width < 1 or height < 1:
                raise CodecError("empty frame dimensions")
            if mode >= len(PFRAME_MODES):
                raise CodecError(f"unknown P-frame mode {mode}")
            cfg = CodecConfig(xi / TOLERANCE_SCALE, q or 65536, p, bg, PFRAME_MODES[mode])
        except (FormatError, ValueError) as exc:
            if isinstance(exc, CodecError):
                raise
            raise CodecError(str(exc)) from exc
        return cls(width, height, count, cfg, version)


@dataclass(frozen=True)
class EncodedFrame:
    frame_type: FrameType
    payload: bytes

    @property
    def raw_bit_count(self) -> int:
        return 8 * len(self.payload)


@dataclass(frozen=True)
class EncodedVideo:
    header: VideoHeader
    frames: tuple[EncodedFrame, ...] = field(default_factory=tuple)

    @property
    def total_bits(self) -> int:
        return coded_size_bits(self)

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(self.header.to_bytes())
        for f in self.frames:
            w.u8(int(f.frame_type))
            w.u32(len(f.payload))
            w.raw(f.payload)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, partial: bool = False) -> EncodedVideo:
        """Parse a container.

        With ``partial`` a truncated or damaged tail is dropped and the frames
        read so far are kept (the header then reports the shorter count).
        """
        r = Reader(bytes(data))
        header = VideoHeader.read(r)
        frames = []
        for k in range(header.frame_count):
            try:
                frames.append(_read_frame(r, k, header.config))
            except CodecError:
                if partial:
                    break
                raise
        if len(frames) == header.frame_count and r.remaining and not partial:
            raise CodecError(f"{r.remaining} trailing bytes after last frame")
        if len(frames) != header.frame_count:
            header = VideoHeader(header.width, header.height, len(frames), header.config, header.version)
        return cls(header, tuple(frames))


def _read_frame(r: Reader, k: int, cfg: CodecConfig) -> EncodedFrame:
    try:
        ftype = r.u8()
        size = r.u32()
        payload = r.raw(size)
    except FormatError as exc:
        raise CodecError(str(exc), k) from exc
    if ftype not in (FrameType.I, FrameType.P):
        raise CodecError(f"unknown frame type {ftype}", k)
    if ftype != cfg.frame_type(k):
        raise CodecError(f"frame type {FrameType(ftype).name} breaks the period-{cfg.p} schedule", k)
    return EncodedFrame(FrameType(ftype), payload)


def coded_size_bits(ev: EncodedVideo) -> int:
    """Exact size of the serialized container in bits."""
    return 8 * (HEADER_BYTES + sum(FRAME_HEADER_BYTES + len(f.payload) for f in ev.frames))


# -- payload records ---------------------------------------------------------


def _write_axis_stream(w: Writer, symbols: np.ndarray, lo: int, hi: int, q: int) -> None:
    a = axis_alphabet(lo, hi, q)
    if len(symbols) and a > 1:
        w.raw(encode_symbols(symbols, a).data)


def _read_axis_stream(r: Reader, n: int, lo: int, hi: int, q: int) -> np.ndarray:
    if hi < lo:
        raise FormatError(f"inverted range [{lo}, {hi}]")
    a = axis_alphabet(lo, hi, q)
    if n == 0 or a <= 1:
        return np.zeros(n, dtype=np.int64)
    symbols, r.pos = decode_stream(r.data, r.pos, n, a)
    return symbols


def _write_intra(w: Writer, qc: QuantizedContour, q: int) -> None:
    w.u16(qc.label)
    w.varint(qc.point_count)
    w.u16(qc.start[0])
    w.u16(qc.start[1])
    w.i16(qc.delta_min[0])
    w.i16(qc.delta_max[0])
    w.i16(qc.delta_min[1])
    w.i16(qc.delta_max[1])
    _write_axis_stream(w, qc.symbols_row, qc.delta_min[0], qc.delta_max[0], q)
    _write_axis_stream(w, qc.symbols_col, qc.delta_min[1], qc.delta_max[1], q)


def _read_intra(r: Reader, q: int, max_points: int) -> QuantizedContour:
    label = r.u16()
    count = r.varint()
    if not 1 <= count <= max_points:
        raise FormatError(f"implausible point count {count}")
    start = (r.u16(), r.u16())
    rmin, rmax, cmin, cmax = r.i16(), r.i16(), r.i16(), r.i16()
    rows = _read_axis_stream(r, count - 1, rmin, rmax, q)
    cols = _read_axis_stream(r, count - 1, cmin, cmax, q)
    return QuantizedContour(label, start, (rmin, cmin), (rmax, cmax), rows, cols)


def _write_moves(w: Writer, records: list[MotionRecord]) -> None:
    w.varint(len(records))
    for rec in records:
        w.varint(rec.instance_index)
        w.u16(rec.label)
    if not records:
        return
    v = np.array([rec.v for rec in records], dtype=np.int64)
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    if lo.min() < -0x8000 or hi.max() > 0x7FFF:
        raise ValueError("motion vector exceeds 16 bits")
    for axis in range(2):
        w.i16(int(lo[axis]))
        w.i16(int(hi[axis]))
    for axis in range(2):
        _write_axis_stream(w, v[:, axis] - lo[axis], int(lo[axis]), int(hi[axis]), 1 << 16)


def _read_moves(r: Reader, max_records: int) -> list[MotionRecord]:
    n = r.varint()
    if n > max_records:
        raise FormatError(f"{n} motion records for {max_records} instances")
    heads = [(r.varint(), r.u16()) for _ in range(n)]
    if not n:
        return []
    ranges = [(r.i16(), r.i16()) for _ in range(2)]
    comps = [_read_axis_stream(r, n, lo, hi, 1 << 16) + lo for lo, hi in ranges]
    return [
        MotionRecord(label, idx, (int(comps[0][k]), int(comps[1][k])))
        for k, (idx, label) in enumerate(heads)
    ]


# -- encoder / decoder state machines ---------------------------------------


class Encoder:
    """Frame-by-frame encoder that tracks the decoder's reference instances.

    Motion is estimated open-loop on the ground-truth maps (each reference
    instance remembers the moment of the ground-truth region it was last
    matched to) and applied to the decoded contours.
    """

    def __init__(self, width: int, height: int, cfg: CodecConfig):
        if not (1 <= width <= MAX_DIMENSION and 1 <= height <= MAX_DIMENSION):
            raise ValueError(f"frame dimensions must lie in [1, {MAX_DIMENSION}]")
        self.width = width
        self.height = height
        self.cfg = cfg
        self.index = 0
        self.reference: list[InstanceContour] = []
        self.moments: list[Moment] = []

    def _intra(self, instances, w: Writer) -> list[InstanceContour]:
        decoded = []
        for inst in instances:
            qc = quantize_deltas(diff_encode(simplify(inst, self.cfg.xi)), self.cfg.q)
            _write_intra(w, qc, self.cfg.q)
            decoded.append(dequantize_and_sum(qc, self.cfg.q))
        return decoded

    def encode_frame(self, labels) -> EncodedFrame:
        m = as_label_map(labels)
        if m.shape != (self.height, self.width):
            raise ValueError(f"frame {self.index}: size {m.shape[::-1]} != {(self.width, self.height)}")
        ftype = self.cfg.frame_type(self.index)
        comps = label_components(m)
        cur = component_moments(comps)
        w = Writer()
        if ftype == FrameType.I:
            order = self._ordered(comps, range(len(comps)))
            w.varint(len(order))
            self.reference = self._intra([inst for _, inst in order], w)
            self.moments = [cur[j] for j, _ in order]
        else:
            matches = match_instances(self.moments, cur)
            records = [
                MotionRecord(self.moments[i].label, i, motion_vector(self.moments[i], cur[j]))
                for i, j in matches
            ]
            _write_moves(w, records)
            self.reference = apply_motion(self.reference, records)
            for i, j in matches:
                self.moments[i] = cur[j]
            if self.cfg.pframe_mode == "extended":
                self._extend(w, comps, cur, matches)
        self.index += 1
        return EncodedFrame(ftype, w.getvalue())

    @staticmethod
    def _ordered(comps, indices):
        pairs = [(j, comps.contour(j)) for j in indices]
        pairs.sort(key=lambda p: instance_order_key(p[1]))
        return pairs

    def _extend(self, w: Writer, comps, cur, matches) -> None:
        matched_prev = {i for i, _ in matches}
        matched_cur = {j for _, j in matches}
        removed = [i for i in range(len(self.reference)) if i not in matched_prev]
        w.varint(len(removed))
        for i in removed:
            w.varint(i)
        added = self._ordered(comps, [j for j in range(len(cur)) if j not in matched_cur])
        w.varint(len(added))
        decoded = self._intra([inst for _, inst in added], w)
        keep = [i for i in range(len(self.reference)) if i in matched_prev]
        self.reference = [self.reference[i] for i in keep] + decoded
        self.moments = [self.moments[i] for i in keep] + [cur[j] for j, _ in added]


class Decoder:
    """Sequential decoder; P-frames need the instances of the previous frame."""

    def __init__(self, header: VideoHeader):
        self.header = header
        self.reference: list[InstanceContour] | None = None

    def reset(self) -> None:
        self.reference = None

    def decode_frame(self, k: int, frame: EncodedFrame) -> np.ndarray:
        cfg = self.header.config
        pixels = self.header.width * self.header.height
        # a closed trace visits each pixel at most four times
        max_points = 4 * pixels + 1
        r = Reader(frame.payload)
        try:
            if frame.frame_type == FrameType.I:
                n = r.varint()
                if n > pixels:
                    raise FormatError(f"{n} instances in a {pixels}-pixel frame")
                reference = [dequantize_and_sum(_read_intra(r, cfg.q, max_points), cfg.q) for _ in range(n)]
            else:
                if self.reference is None:
                    raise CodecError("P-frame without a decoded reference", k)
                records = _read_moves(r, len(self.reference))
                for rec in records:
                    if rec.instance_index < len(self.reference):
                        if self.reference[rec.instance_index].label != rec.label:
                            raise FormatError(f"label mismatch for instance {rec.instance_index}")
                reference = apply_motion(self.reference, records)
                if cfg.pframe_mode == "extended":
                    n_removed = r.varint()
                    if n_removed > len(reference):
                        raise FormatError(f"{n_removed} removals for {len(reference)} instances")
                    removed = {r.varint() for _ in range(n_removed)}
                    n_added = r.varint()
                    if n_added > pixels:
                        raise FormatError(f"{n_added} instances in a {pixels}-pixel frame")
                    added = [dequantize_and_sum(_read_intra(r, cfg.q, max_points), cfg.q) for _ in range(n_added)]
                    reference = [c for i, c in enumerate(reference) if i not in removed] + added
            if r.remaining:
                raise FormatError(f"{r.remaining} trailing payload bytes")
        except CodecError:
            raise
        except (FormatError, EntropyDecodeError, IndexError, ValueError) as exc:
            raise CodecError(str(exc), k) from exc
        self.reference = reference
        return rasterize(reference, self.header.width, self.header.height, cfg.background_label)


def encode_video(frames, cfg: CodecConfig | None = None) -> EncodedVideo:
    """Encode a sequence of semantic maps; frame ``k`` is intra iff ``k % p == 0``."""
    cfg = cfg or CodecConfig()
    frames = [as_label_map(f) for f in frames]
    if not frames:
        raise ValueError("need at least one frame")
    h, w = frames[0].shape
    for k, f in enumerate(frames):
        if f.shape != (h, w):
            raise ValueError(f"frame {k}: size {f.shape} differs from frame 0 {(h, w)}")
    enc = Encoder(w, h, cfg)
    coded = tuple(enc.encode_frame(f) for f in frames)
    return EncodedVideo(VideoHeader(w, h, len(frames), cfg), coded)


def decode_video(ev: EncodedVideo, start: int = 0) -> list[np.ndarray]:
    """Decode every frame from ``start`` on; ``start`` must be an I-frame."""
    if len(ev.frames) != ev.header.frame_count:
        raise CodecError(f"header announces {ev.header.frame_count} frames, found {len(ev.frames)}")
    if start and (start >= len(ev.frames) or ev.frames[start].frame_type != FrameType.I):
        raise CodecError("decoding must start at an I-frame", start)
    dec = Decoder(ev.header)
    return [dec.decode_frame(k, ev.frames[k]) for k in range(start, len(ev.frames))]
