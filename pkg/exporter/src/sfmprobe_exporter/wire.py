"""Writers for the feature-file and manifest wire formats.

This is an independent implementation of the documented formats (not an
import of the consumer library): the boundary between exporter and
trainer is the bytes on disk, and the test suite checks byte-for-byte
compatibility against the consumer's reader.

Feature file ("SFMF", little-endian):
    magic "SFMF", version u32=1, ears u32=2, layers u32, frames u32,
    channels u32, float32 payload in [ear][layer][frame][channel] order,
    u64 FNV-1a checksum over the payload bytes.

Manifest: JSON {sfm, audiogram_frequencies, samples}; feature paths
relative to the manifest file.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SFMF"
VERSION = 1
EARS = 2

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class ExportError(RuntimeError):
    pass


def fnv1a64(payload: bytes) -> int:
    h = _FNV_OFFSET
    for byte in payload:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def write_feature_file(values: np.ndarray, path: str | Path) -> None:
    """values: float32 [2, layers, frames, channels], finite."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 4 or values.shape[0] != EARS:
        raise ExportError(f"expected [2, L, T, C] features, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ExportError("refusing to write non-finite features")
    _, layers, frames, channels = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIIII", MAGIC, VERSION, EARS, layers, frames, channels))
        fh.write(payload)
        fh.write(struct.pack("<Q", fnv1a64(payload)))


def write_manifest(
    path: str | Path,
    sfm: dict,
    audiogram_frequencies: list[float],
    samples: list[dict],
) -> Path:
    doc = {
        "sfm": sfm,
        "audiogram_frequencies": list(audiogram_frequencies),
        "samples": samples,
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
