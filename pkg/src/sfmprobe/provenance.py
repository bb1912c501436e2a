"""Stable hashing, seed derivation, and canonical artifact writing.

Every artifact JSON is written with sorted keys and a trailing newline
so that re-running a command reproduces it byte-for-byte.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path


def stable_seed(*parts) -> int:
    """Derive a 63-bit seed from arbitrary string-able parts.

    Unlike builtin `hash`, stable across processes and runs, so parallel
    and serial sweep execution agree.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & 0x7FFFFFFFFFFFFFFF


def content_hash(path: str | Path) -> str:
    """Content-addressed digest of a file (sha256, shortened)."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest[:16]}"


def tree_hash(root: str | Path) -> str:
    """Digest of a directory: sorted relative paths and their contents."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(b"\x00")
        h.update(path.read_bytes())
        h.update(b"\x00")
    return f"sha256:{h.hexdigest()[:16]}"


def write_json_artifact(doc: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
