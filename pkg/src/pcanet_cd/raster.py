"""Raster data model, binary PGM I/O and the log-ratio difference operator."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, FormatError, ParameterError, RangeError

DEFAULT_LOG_OFFSET = 1.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Raster:
    """Single-channel intensity image stored as a (height, width) float64 array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ParameterError(f"raster must be a non-empty 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise RangeError("raster intensities must be finite")
        if np.any(v < 0):
            raise RangeError("raster intensities must be non-negative")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class ReferenceMap:
    """Binary change reference: 0 = unchanged, 1 = changed."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.shape[0] < 1 or lab.shape[1] < 1:
            raise ParameterError(f"reference map must be a non-empty 2-D array, got shape {lab.shape}")
        if not np.all((lab == 0) | (lab == 1)):
            raise RangeError("reference labels must be exactly 0 or 1")
        object.__setattr__(self, "labels", _frozen(lab.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def changed(self) -> np.ndarray:
        return self.labels == 1

    def __eq__(self, other):
        if not isinstance(other, ReferenceMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))


@dataclass(frozen=True)
class TemporalPair:
    """Two co-registered acquisitions of the same scene."""

    t1: Raster
    t2: Raster

    def __post_init__(self):
        if self.t1.shape != self.t2.shape:
            raise AlignmentError(
                f"temporal images differ in size: t1 is {self.t1.width}x{self.t1.height}, "
                f"t2 is {self.t2.width}x{self.t2.height} (width x height)"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.t1.shape


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise FormatError(f"unterminated comment at byte offset {pos}")
            pos = eol + 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"truncated header at byte offset {start}")
    return data[start:pos], pos


def _parse_int(tok: bytes, offset: int, what: str) -> int:
    if not tok.isdigit():
        raise FormatError(f"malformed {what} {tok!r} at byte offset {offset}")
    return int(tok)


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM into a (height, width) integer array."""
    if len(data) < 2:
        raise FormatError("truncated header at byte offset 0")
    magic = data[:2]
    if magic != b"P5":
        if magic in (b"P1", b"P2", b"P3", b"P4", b"P6"):
            raise FormatError(f"unsupported PNM variant {magic.decode()} at byte offset 0 (only binary P5)")
        raise FormatError("bad magic number at byte offset 0")
    pos = 2
    fields = []
    for what in ("width", "height", "maxval"):
        tok, end = _read_header_token(data, pos)
        fields.append(_parse_int(tok, end - len(tok), what))
        pos = end
    width, height, maxval = fields
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"missing whitespace after maxval at byte offset {pos}")
    pos += 1
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height} before byte offset {pos}")
    if maxval < 1 or maxval > 65535:
        raise FormatError(f"unsupported maxval {maxval} before byte offset {pos}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise FormatError(
            f"truncated payload at byte offset {pos + len(payload)}: expected {need} bytes, found {len(payload)}"
        )
    samples = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if np.any(samples > maxval):
        bad = int(np.flatnonzero(samples.ravel() > maxval)[0])
        raise FormatError(f"sample exceeds maxval at byte offset {pos + bad * dtype.itemsize}")
    return samples.astype(np.int64)


def encode_pgm(values: np.ndarray, bit_depth: int = 8) -> bytes:
    if bit_depth not in (8, 16):
        raise ParameterError(f"bit depth must be 8 or 16, got {bit_depth}")
    v = np.rint(np.asarray(values, dtype=np.float64))
    top = (1 << bit_depth) - 1
    bad = ~((v >= 0) & (v <= top))
    if np.any(bad):
        r, c = np.argwhere(bad)[0]
        raise RangeError(
            f"pixel (row={r}, col={c}) value {values[r, c]} outside [0, {top}] for {bit_depth}-bit output"
        )
    height, width = v.shape
    header = f"P5\n{width} {height}\n{top}\n".encode("ascii")
    dtype = ">u2" if bit_depth == 16 else "u1"
    return header + v.astype(dtype).tobytes()


def load_raster(path: str | os.PathLike) -> Raster:
    with open(path, "rb") as fh:
        data = fh.read()
    return Raster(decode_pgm(data).astype(np.float64))


def save_raster(r: Raster, path: str | os.PathLike, bit_depth: int = 8) -> None:
    data = encode_pgm(r.values, bit_depth)
    with open(path, "wb") as fh:
        fh.write(data)


def load_pair(path1: str | os.PathLike, path2: str | os.PathLike) -> TemporalPair:
    return TemporalPair(load_raster(path1), load_raster(path2))


def load_reference(path: str | os.PathLike) -> ReferenceMap:
    """Load an 8-bit reference PGM; any nonzero sample counts as changed."""
    with open(path, "rb") as fh:
        samples = decode_pgm(fh.read())
    return ReferenceMap((samples != 0).astype(np.uint8))


def save_reference(ref: ReferenceMap, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(ref.labels.astype(np.float64) * 255, 8))


def check_reference(pair: TemporalPair, ref: ReferenceMap) -> None:
    if ref.shape != pair.shape:
        raise AlignmentError(
            f"reference map is {ref.width}x{ref.height} but images are "
            f"{pair.t1.width}x{pair.t1.height} (width x height)"
        )


def log_ratio(pair: TemporalPair, offset: float = DEFAULT_LOG_OFFSET) -> Raster:
    """Per-pixel ``|ln((t2 + offset) / (t1 + offset))|``.

    Evaluated as a difference of logs so the result is exactly symmetric in
    the two dates and exactly zero where they agree.
    """
    if not offset > 0:
        raise ParameterError(f"log-ratio offset must be positive, got {offset}")
    a = np.log(pair.t1.values + offset)
    b = np.log(pair.t2.values + offset)
    return Raster(np.abs(b - a))
