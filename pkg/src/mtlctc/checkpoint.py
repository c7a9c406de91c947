"""Versioned binary checkpoints.

Layout, little-endian::

    magic      8 bytes   b"MTLCKPT\\0"
    version    uint32
    hdr_len    uint64
    header     hdr_len bytes of UTF-8 JSON (topology, feature config,
               optimiser scalars, metadata, ordered array table)
    payload    float64 values of every array in table order
    crc32      uint32 over everything above
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureConfig, Normalizer
from .model import ModelGraph, graph_from_description
from .nn.adam import AdamState

MAGIC = b"MTLCKPT\0"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_CRC = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    def __init__(self, found: int, expected: int):
        self.found, self.expected = found, expected
        super().__init__(f"checkpoint format version {found} is not supported (this build reads version {expected})")


@dataclass
class Checkpoint:
    model: ModelGraph
    features: FeatureConfig
    normalizer: Normalizer
    adam: AdamState | None = None
    metadata: dict = field(default_factory=dict)


def _arrays(ckpt: Checkpoint) -> list:
    out = [(f"param/{k}", v) for k, v in ckpt.model.parameters().items()]
    out.append(("norm/mean", ckpt.normalizer.mean))
    out.append(("norm/std", ckpt.normalizer.std))
    if ckpt.adam is not None:
        for k in sorted(ckpt.adam.m):
            out.append((f"adam.m/{k}", ckpt.adam.m[k]))
            out.append((f"adam.v/{k}", ckpt.adam.v[k]))
    return out


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = _arrays(ckpt)
    adam = None
    if ckpt.adam is not None:
        a = ckpt.adam
        adam = {"t": a.t, "lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps}
    header = {
        "topology": ckpt.model.describe(),
        "features": ckpt.features.to_dict(),
        "adam": adam,
        "metadata": ckpt.metadata,
        "arrays": [[name, list(np.shape(arr))] for name, arr in arrays],
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, VERSION, len(hdr)), hdr]
    parts.extend(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in arrays)
    body = b"".join(parts)
    Path(path).write_bytes(body + _CRC.pack(zlib.crc32(body)))


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CorruptCheckpointError(
            f"{path}: file ends at byte {len(data)}, inside the {_PREFIX.size}-byte prefix")
    magic, version, hdr_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise CheckpointVersionError(version, VERSION)
    pos = _PREFIX.size
    if len(data) < pos + hdr_len:
        raise CorruptCheckpointError(
            f"{path}: header needs bytes {pos}..{pos + hdr_len}, file ends at byte {len(data)}")
    try:
        header = json.loads(data[pos:pos + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{path}: unreadable header at offset {pos}: {e}") from None
    pos += hdr_len
    arrays = {}
    for name, shape in header["arrays"]:
        n = int(np.prod(shape)) if shape else 1
        end = pos + 8 * n
        if end > len(data) - _CRC.size:
            raise CorruptCheckpointError(
                f"{path}: array {name!r} needs bytes {pos}..{end}, payload ends at byte "
                f"{max(len(data) - _CRC.size, pos)}")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos = end
    if len(data) != pos + _CRC.size:
        raise CorruptCheckpointError(
            f"{path}: expected {pos + _CRC.size} bytes, found {len(data)} (trailing data at offset {pos})")
    (stored,) = _CRC.unpack_from(data, pos)
    actual = zlib.crc32(data[:pos])
    if stored != actual:
        raise CorruptCheckpointError(
            f"{path}: checksum mismatch at offset {pos} (stored {stored:#010x}, computed {actual:#010x})")

    params = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    model = graph_from_description(header["topology"], params)
    adam = None
    if header["adam"] is not None:
        a = header["adam"]
        adam = AdamState(m={k[len("adam.m/"):]: v for k, v in arrays.items() if k.startswith("adam.m/")},
                         v={k[len("adam.v/"):]: v for k, v in arrays.items() if k.startswith("adam.v/")},
                         t=a["t"], lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"])
    return Checkpoint(model, FeatureConfig.from_dict(header["features"]),
                      Normalizer(arrays["norm/mean"], arrays["norm/std"]), adam, header["metadata"])
