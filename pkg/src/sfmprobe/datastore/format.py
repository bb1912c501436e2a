"""Binary per-sample feature container ("SFMF").

Layout, all little-endian:

    magic    4 bytes  b"SFMF"
    version  u32      1
    ears     u32      2
    layers   u32
    frames   u32
    channels u32
    payload  ears*layers*frames*channels float32, [ear][layer][frame][channel]
    checksum u64      FNV-1a over the payload bytes

One file holds every layer and both ears of one sample, so a layer
sweep needs a single read per sample.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sfmprobe.exceptions import (
    BadMagicError,
    ChecksumError,
    FeatureFileError,
    NonFiniteValueError,
    TruncatedFileError,
    VersionError,
)

MAGIC = b"SFMF"
VERSION = 1
EARS = 2
_HEADER = struct.Struct("<4sIIIII")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(payload: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for byte in payload:
        h = ((h ^ byte) * _FNV_PRIME) & _U64_MASK
    return h


@dataclass(frozen=True)
class LayerFeatureTensor:
    """Per-sample encoder features, float32, shaped [ear][layer][frame][channel]."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 4:
            raise FeatureFileError(f"expected 4 axes [ear][layer][frame][channel], got {v.ndim}")
        if v.shape[0] != EARS:
            raise FeatureFileError(f"expected {EARS} ears, got {v.shape[0]}")
        if min(v.shape[1:]) < 1:
            raise FeatureFileError(f"all extents must be >= 1, got shape {v.shape}")
        if v.dtype != np.float32:
            object.__setattr__(self, "values", v.astype(np.float32))
        if not np.isfinite(self.values).all():
            raise NonFiniteValueError("feature tensor contains non-finite values")

    @property
    def layers(self) -> int:
        return self.values.shape[1]

    @property
    def frames(self) -> int:
        return self.values.shape[2]

    @property
    def channels(self) -> int:
        return self.values.shape[3]


def write_feature_file(tensor: LayerFeatureTensor, path: str | Path) -> None:
    v = tensor.values
    payload = np.ascontiguousarray(v, dtype="<f4").tobytes()
    header = _HEADER.pack(MAGIC, VERSION, EARS, v.shape[1], v.shape[2], v.shape[3])
    checksum = struct.pack("<Q", fnv1a64(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(checksum)


def read_feature_file(path: str | Path) -> LayerFeatureTensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than header")
    magic, version, ears, layers, frames, channels = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    if ears != EARS:
        raise FeatureFileError(f"{path}: expected {EARS} ears, header says {ears}")
    if min(layers, frames, channels) < 1:
        raise FeatureFileError(f"{path}: zero extent in header")
    count = ears * layers * frames * channels
    payload_end = _HEADER.size + 4 * count
    if len(raw) < payload_end + 8:
        raise TruncatedFileError(
            f"{path}: need {payload_end + 8} bytes for declared dims, have {len(raw)}"
        )
    if len(raw) > payload_end + 8:
        raise FeatureFileError(f"{path}: {len(raw) - payload_end - 8} trailing bytes")
    payload = raw[_HEADER.size:payload_end]
    (stored,) = struct.unpack_from("<Q", raw, payload_end)
    actual = fnv1a64(payload)
    if stored != actual:
        raise ChecksumError(f"{path}: checksum {actual:#018x} != stored {stored:#018x}")
    values = np.frombuffer(payload, dtype="<f4").reshape(ears, layers, frames, channels)
    return LayerFeatureTensor(values=values.copy())
