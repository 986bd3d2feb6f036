"""Binary model file.

Layout (all integers unsigned 32-bit little-endian, reals IEEE-754 float64 LE)::

    "PCNM" | version=1 | h | k | L1 | L2 | block_side | D | normalize_hist (1 byte)
    stage-1 filters  L1*k*k reals, filter-major, row-major within a filter
    stage-2 filters  L2*k*k reals, same order
    weights          D reals
    bias             1 real
    CRC32 of every preceding byte (uint32 LE)
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .classifier import LinearModel
from .errors import ChecksumError, DimensionError, MagicError, TruncationError, VersionError
from .pcanet import FilterBank, PcaNetModel

MAGIC = b"PCNM"
VERSION = 1
_HEADER = struct.Struct("<4s7I?")
_CRC = struct.Struct("<I")


def dumps(model: PcaNetModel) -> bytes:
    if model.classifier is None:
        raise DimensionError("cannot serialize a model without a classifier")
    head = _HEADER.pack(
        MAGIC,
        VERSION,
        model.h,
        model.k,
        model.stage1.count,
        model.stage2.count,
        model.block_side,
        model.feature_length,
        bool(model.normalize_hist),
    )
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in (model.stage1.filters, model.stage2.filters, model.classifier.weights, [model.classifier.bias])
    )
    payload = head + body
    return payload + _CRC.pack(zlib.crc32(payload))


def loads(data: bytes) -> PcaNetModel:
    if len(data) < 4:
        raise TruncationError(f"model file truncated: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size + _CRC.size:
        raise TruncationError(f"model file truncated: {len(data)} bytes")
    _, version, h, k, l1, l2, block, d, norm = _HEADER.unpack_from(data)
    n_reals = (l1 + l2) * k * k + d + 1
    expected = _HEADER.size + 8 * n_reals + _CRC.size
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[: -_CRC.size]) != crc:
        if len(data) < expected:
            raise TruncationError(f"model file truncated: {len(data)} of {expected} bytes")
        raise ChecksumError("model file CRC mismatch (corrupted)")
    if version != VERSION:
        raise VersionError(f"unsupported model version {version}, expected {VERSION}")
    if len(data) != expected:
        raise TruncationError(f"model file is {len(data)} bytes, header implies {expected}")

    reals = np.frombuffer(data, dtype="<f8", count=n_reals, offset=_HEADER.size).astype(np.float64)
    n1, n2 = l1 * k * k, l2 * k * k
    stage1 = FilterBank(reals[:n1].reshape(l1, k, k))
    stage2 = FilterBank(reals[n1 : n1 + n2].reshape(l2, k, k))
    clf = LinearModel(reals[n1 + n2 : n1 + n2 + d], reals[-1])
    model = PcaNetModel(h, k, stage1, stage2, block, bool(norm), clf)
    if model.feature_length != d:
        raise DimensionError(f"stored feature length {d} inconsistent with geometry ({model.feature_length})")
    return model


def save_model(model: PcaNetModel, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path: str | os.PathLike) -> PcaNetModel:
    with open(path, "rb") as fh:
        return loads(fh.read())
