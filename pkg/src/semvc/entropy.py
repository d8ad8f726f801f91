"""Adaptive order-0 range coder.

Carry-less 32-bit range coder (Subbotin style) with byte renormalisation and a
4-byte flush.  Each stream starts from a fresh model: every symbol count is 1,
a coded symbol's count grows by ``MODEL_INCREMENT`` and all counts are halved
(floor 1) once the total exceeds ``MODEL_LIMIT``.  Cumulative frequencies live
in a Fenwick tree, so large alphabets cost ``O(log q)`` per symbol.

The decoder consumes exactly the bytes the encoder produced, so streams can be
concatenated without length prefixes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "MODEL_INCREMENT",
    "MODEL_LIMIT",
    "MAX_ALPHABET",
    "Bitstream",
    "EntropyDecodeError",
    "model_increment",
    "encode_symbols",
    "decode_symbols",
    "decode_stream",
]

MODEL_INCREMENT = 32
MODEL_LIMIT = 1 << 16
MAX_ALPHABET = 1 << 16

_TOP = 1 << 24
_BOT = 1 << 16
_MASK = (1 << 32) - 1

_OK = 0
_ERR_TRUNCATED = 1
_ERR_RANGE = 2


class EntropyDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Bitstream:
    data: bytes
    bit_length: int

    def __post_init__(self):
        if self.bit_length > 8 * len(self.data):
            raise ValueError("bit_length exceeds the byte payload")

    def __len__(self) -> int:
        return len(self.data)


def model_increment(q: int) -> int:
    """Count increment for an alphabet of ``q`` symbols.

    Alphabets close to ``MODEL_LIMIT`` cannot absorb the full increment and
    still satisfy ``total <= MODEL_LIMIT``; they adapt more slowly, and a
    65536-symbol model stays uniform.
    """
    return min(MODEL_INCREMENT, MODEL_LIMIT - q)


@numba.njit(cache=True)
def _tree_build(counts, tree):
    n = counts.shape[0]
    tree[:] = 0
    for i in range(n):
        j = i + 1
        tree[j] += counts[i]
        p = j + (j & -j)
        if p <= n:
            tree[p] += tree[j]


@numba.njit(cache=True)
def _tree_add(tree, i, delta):
    n = tree.shape[0] - 1
    j = i + 1
    while j <= n:
        tree[j] += delta
        j += j & -j


@numba.njit(cache=True)
def _tree_prefix(tree, i):
    # sum of counts[0:i]
    s = 0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & -j
    return s


@numba.njit(cache=True)
def _tree_find(tree, target, top_bit):
    # largest position with prefix sum <= target; returns (symbol, cumulative low)
    n = tree.shape[0] - 1
    pos = 0
    acc = 0
    step = top_bit
    while step > 0:
        nxt = pos + step
        if nxt <= n and acc + tree[nxt] <= target:
            pos = nxt
            acc += tree[nxt]
        step >>= 1
    return pos, acc


@numba.njit(cache=True)
def _model_update(counts, tree, total, s, inc, limit):
    if inc == 0:
        return total
    counts[s] += inc
    total += inc
    if total > limit:
        total = 0
        for i in range(counts.shape[0]):
            c = counts[i] >> 1
            if c < 1:
                c = 1
            counts[i] = c
            total += c
        _tree_build(counts, tree)
    else:
        _tree_add(tree, s, inc)
    return total


@numba.njit(cache=True)
def _encode(symbols, q, inc, limit):
    counts = np.ones(q, dtype=np.int64)
    tree = np.zeros(q + 1, dtype=np.int64)
    _tree_build(counts, tree)
    total = q
    out = np.empty(64 + 4 * symbols.shape[0], dtype=np.uint8)
    n = 0
    low = 0
    rng = 0xFFFFFFFF
    for k in range(symbols.shape[0]):
        s = symbols[k]
        cum = _tree_prefix(tree, s)
        r = rng // total
        low += cum * r
        rng = r * counts[s]
        while True:
            if (low ^ (low + rng)) < 0x1000000:
                pass
            elif rng < 0x10000:
                rng = (-low) & 0xFFFF
            else:
                break
            if n == out.shape[0]:
                grown = np.empty(out.shape[0] * 2, dtype=np.uint8)
                grown[:n] = out[:n]
                out = grown
            out[n] = (low >> 24) & 0xFF
            n += 1
            rng = (rng << 8) & 0xFFFFFFFF
            low = (low << 8) & 0xFFFFFFFF
        total = _model_update(counts, tree, total, s, inc, limit)
    for _ in range(4):
        if n == out.shape[0]:
            grown = np.empty(out.shape[0] * 2, dtype=np.uint8)
            grown[:n] = out[:n]
            out = grown
        out[n] = (low >> 24) & 0xFF
        n += 1
        low = (low << 8) & 0xFFFFFFFF
    return out[:n].copy()


@numba.njit(cache=True)
def _decode(data, start, count, q, inc, limit):
    symbols = np.zeros(count, dtype=np.int64)
    counts = np.ones(q, dtype=np.int64)
    tree = np.zeros(q + 1, dtype=np.int64)
    _tree_build(counts, tree)
    total = q
    top_bit = 1
    while top_bit * 2 <= q:
        top_bit *= 2
    end = data.shape[0]
    pos = start
    if end - pos < 4:
        return symbols, pos, 1
    code = 0
    for _ in range(4):
        code = (code << 8) | data[pos]
        pos += 1
    low = 0
    rng = 0xFFFFFFFF
    for k in range(count):
        r = rng // total
        v = ((code - low) & 0xFFFFFFFF) // r
        if v >= total:
            return symbols, pos, 2
        s, cum = _tree_find(tree, v, top_bit)
        symbols[k] = s
        low += cum * r
        rng = r * counts[s]
        while True:
            if (low ^ (low + rng)) < 0x1000000:
                pass
            elif rng < 0x10000:
                rng = (-low) & 0xFFFF
            else:
                break
            if pos >= end:
                return symbols, pos, 1
            code = ((code << 8) | data[pos]) & 0xFFFFFFFF
            pos += 1
            rng = (rng << 8) & 0xFFFFFFFF
            low = (low << 8) & 0xFFFFFFFF
        total = _model_update(counts, tree, total, s, inc, limit)
    return symbols, pos, 0


def _check_alphabet(q: int) -> None:
    if not 2 <= q <= MAX_ALPHABET:
        raise ValueError(f"alphabet size must lie in [2, {MAX_ALPHABET}], got {q}")


def encode_symbols(symbols, q: int) -> Bitstream:
    """Range-code ``symbols`` (integers in ``[0, q)``) with a fresh adaptive model."""
    _check_alphabet(q)
    arr = np.asarray(symbols, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= q):
        raise ValueError(f"symbols must lie in [0, {q})")
    data = _encode(arr, q, model_increment(q), MODEL_LIMIT).tobytes()
    return Bitstream(data, 8 * len(data))


def decode_stream(buf, offset: int, count: int, q: int) -> tuple[np.ndarray, int]:
    """Decode ``count`` symbols starting at ``buf[offset]``.

    Returns the symbols and the offset just past the stream.
    """
    _check_alphabet(q)
    if count < 0:
        raise ValueError("symbol count must be non-negative")
    data = np.frombuffer(buf, dtype=np.uint8)
    symbols, end, status = _decode(data, offset, count, q, model_increment(q), MODEL_LIMIT)
    if status == _ERR_TRUNCATED:
        raise EntropyDecodeError(f"range-coded stream truncated at byte {end}")
    if status == _ERR_RANGE:
        raise EntropyDecodeError(f"corrupt range-coded stream near byte {end}")
    return symbols, end


def decode_symbols(bits: Bitstream | bytes, count: int, q: int) -> np.ndarray:
    """Inverse of :func:`encode_symbols`; trailing or missing bytes are errors."""
    data = bits.data if isinstance(bits, Bitstream) else bytes(bits)
    symbols, end = decode_stream(data, 0, count, q)
    if end != len(data):
        raise EntropyDecodeError(f"{len(data) - end} unread bytes after {count} symbols")
    return symbols
