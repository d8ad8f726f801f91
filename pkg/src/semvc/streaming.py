"""Per-frame packets with CRC-32, a lossy channel model and a concealing receiver.

Wire layout of a packet (little-endian)::

    stream_id u32 | frame_index u32 | frame_type u8 | payload_length u32
    | payload | crc32 u32   (over every preceding byte)

The video header travels out of band (session setup).  Dump files put it in a
leading session packet with ``frame_type == SESSION_TYPE`` so a dump is
self-contained.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .binio import Reader
from .codec import CodecError, Decoder, EncodedFrame, EncodedVideo, FrameType, VideoHeader

__all__ = [
    "SESSION_TYPE",
    "Packet",
    "PacketError",
    "ChannelModel",
    "LossReport",
    "Receiver",
    "packetize",
    "depacketize",
    "simulate_and_decode",
    "write_dump",
    "read_dump",
]

SESSION_TYPE = 0xFF
SESSION_INDEX = 0xFFFFFFFF
_HEAD = struct.Struct("<IIBI")
_CRC = struct.Struct("<I")


class PacketError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    stream_id: int
    frame_index: int
    frame_type: int
    payload: bytes
    crc32: int | None = None

    def __post_init__(self):
        if self.crc32 is None:
            object.__setattr__(self, "crc32", zlib.crc32(self._head_and_payload()))

    @property
    def payload_length(self) -> int:
        return len(self.payload)

    def _head_and_payload(self) -> bytes:
        head = _HEAD.pack(self.stream_id, self.frame_index, self.frame_type, len(self.payload))
        return head + self.payload

    def verify(self) -> bool:
        return zlib.crc32(self._head_and_payload()) == self.crc32

    def to_bytes(self) -> bytes:
        return self._head_and_payload() + _CRC.pack(self.crc32)

    @classmethod
    def read(cls, r: Reader) -> Packet:
        """Parse one packet; the CRC is carried over, not checked."""
        stream_id, index, ftype, n = _HEAD.unpack(r.raw(_HEAD.size))
        payload = r.raw(n)
        (crc,) = _CRC.unpack(r.raw(_CRC.size))
        return cls(stream_id, index, ftype, payload, crc)

    @classmethod
    def from_bytes(cls, data: bytes) -> Packet:
        r = Reader(bytes(data))
        pkt = cls.read(r)
        if r.remaining:
            raise PacketError(f"{r.remaining} bytes after packet")
        return pkt


def packetize(ev: EncodedVideo, stream_id: int = 0) -> list[Packet]:
    """One packet per frame, in frame order."""
    return [Packet(stream_id, k, int(f.frame_type), f.payload) for k, f in enumerate(ev.frames)]


def depacketize(packets, header: VideoHeader) -> EncodedVideo:
    """Reassemble a complete, in-order, intact packet sequence."""
    frames = []
    for k, pkt in enumerate(packets):
        if not pkt.verify():
            raise PacketError(f"CRC mismatch in packet for frame {pkt.frame_index}")
        if pkt.frame_index != k:
            raise PacketError(f"expected frame {k}, got {pkt.frame_index}")
        frames.append(EncodedFrame(FrameType(pkt.frame_type), pkt.payload))
    if len(frames) != header.frame_count:
        raise PacketError(f"{len(frames)} packets for {header.frame_count} frames")
    return EncodedVideo(header, tuple(frames))


@dataclass(frozen=True)
class ChannelModel:
    """Independent packet erasures with probability ``loss_probability``."""

    loss_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")

    def transmit(self, packets) -> list[Packet | None]:
        rng = np.random.default_rng(self.seed)
        draws = rng.random(len(packets))
        return [None if u < self.loss_probability else p for u, p in zip(draws, packets)]


@dataclass
class LossReport:
    """Frame indices (ascending) by fate.

    ``lost``: packet erased or failed its CRC.  ``concealed``: output frame is
    a held copy of the last decoded one.  ``missing``: no output at all (no
    frame had decoded yet).
    """

    frame_count: int
    lost: list[int] = field(default_factory=list)
    concealed: list[int] = field(default_factory=list)
    missing: list[int] = field(default_factory=list)

    @property
    def decoded(self) -> list[int]:
        bad = set(self.concealed) | set(self.missing)
        return [k for k in range(self.frame_count) if k not in bad]


class Receiver:
    """Receive-side state machine: decode what it can, freeze the last frame otherwise.

    After a lost or undecodable frame the P-frame chain is broken, so every
    frame up to the next intact I-frame is concealed rather than decoded
    against a stale reference.
    """

    def __init__(self, header: VideoHeader):
        self.decoder = Decoder(header)
        self.report = LossReport(header.frame_count)
        self.output: list[np.ndarray] = []
        self._last: np.ndarray | None = None
        self._chain_ok = False

    def push(self, k: int, packet: Packet | None) -> None:
        if packet is not None and (not packet.verify() or packet.frame_index != k):
            packet = None
        if packet is None:
            self.report.lost.append(k)
        decoded = None
        if packet is not None and (packet.frame_type == FrameType.I or self._chain_ok):
            try:
                frame = EncodedFrame(FrameType(packet.frame_type), packet.payload)
                decoded = self.decoder.decode_frame(k, frame)
            except (CodecError, ValueError):
                self.report.lost.append(k)
        if decoded is not None:
            self._chain_ok = True
            self._last = decoded
            self.output.append(decoded)
            return
        self._chain_ok = False
        self.decoder.reset()
        if self._last is None:
            self.report.missing.append(k)
        else:
            self.report.concealed.append(k)
            self.output.append(self._last.copy())


def simulate_and_decode(packets, header: VideoHeader, channel: ChannelModel) -> tuple[list[np.ndarray], LossReport]:
    """Send ``packets`` through ``channel`` and decode with concealment."""
    rx = Receiver(header)
    for k, pkt in enumerate(channel.transmit(list(packets))):
        rx.push(k, pkt)
    return rx.output, rx.report


def write_dump(path, header: VideoHeader, packets, stream_id: int = 0) -> None:
    """Write a session packet carrying ``header`` followed by the given packets."""
    session = Packet(stream_id, SESSION_INDEX, SESSION_TYPE, header.to_bytes())
    with open(path, "wb") as fh:
        fh.write(session.to_bytes())
        for p in packets:
            fh.write(p.to_bytes())


def read_dump(path) -> tuple[VideoHeader, list[Packet]]:
    with open(path, "rb") as fh:
        r = Reader(fh.read())
    try:
        session = Packet.read(r)
        if session.frame_type != SESSION_TYPE or not session.verify():
            raise PacketError("dump does not start with an intact session packet")
        header = VideoHeader.read(Reader(session.payload))
        packets = []
        while r.remaining:
            packets.append(Packet.read(r))
    except (ValueError, struct.error) as exc:
        if isinstance(exc, PacketError):
            raise
        raise PacketError(str(exc)) from exc
    return header, packets
