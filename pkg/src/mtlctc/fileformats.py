"""Binary feature files.

Layout (little-endian): 8-byte magic ``MTLFEAT\\0``, uint32 version,
uint64 T, uint64 D, then T*D float64 values row-major.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .features import FrameMatrix

FEATURE_MAGIC = b"MTLFEAT\0"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<8sIQQ")


class FeatureFileError(ValueError):
    pass


def write_features(path, frames: FrameMatrix) -> None:
    x = np.ascontiguousarray(frames.frames, dtype="<f8")
    T, D = x.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, T, D))
        f.write(x.tobytes())


def read_features(path, frame_period: float = 0.010) -> FrameMatrix:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header ({len(data)} of {_HEADER.size} bytes)")
    magic, version, T, D = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise FeatureFileError(f"{path}: feature file version {version}, expected {FEATURE_VERSION}")
    need = _HEADER.size + 8 * T * D
    if len(data) != need:
        raise FeatureFileError(f"{path}: expected {need} bytes for T={T}, D={D}, found {len(data)}")
    x = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(T, D).astype(np.float64)
    return FrameMatrix(x, frame_period)
