"""Dataset manifest: sample metadata, audiograms, and the SFM descriptor.

A manifest is one JSON document; feature paths inside it are relative
to the manifest's directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sfmprobe.exceptions import ManifestError

HL_MIN = -10.0
HL_MAX = 120.0


@dataclass(frozen=True)
class Audiogram:
    """Per-ear hearing thresholds (dB HL) on the manifest's frequency grid."""

    left: tuple[float, ...]
    right: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(float(x) for x in self.left))
        object.__setattr__(self, "right", tuple(float(x) for x in self.right))
        if len(self.left) != len(self.right):
            raise ManifestError(
                f"audiogram ear lengths differ: {len(self.left)} vs {len(self.right)}"
            )
        for ear in (self.left, self.right):
            for value in ear:
                if not (HL_MIN <= value <= HL_MAX):
                    raise ManifestError(f"threshold {value} outside [{HL_MIN}, {HL_MAX}] dB HL")

    @property
    def bins(self) -> int:
        return len(self.left)

    def as_array(self) -> np.ndarray:
        """[2 x F] float64, left ear first."""
        return np.array([self.left, self.right], dtype=np.float64)


@dataclass(frozen=True)
class SfmAttributes:
    """Published attributes used for the rank-correlation analysis."""

    asr_wer: float          # percent, English transcription
    data_hours: float
    arch_date: str          # "YYYY.MM" of the encoder architecture
    train_task_count: int


@dataclass(frozen=True)
class SfmDescriptor:
    name: str
    layers: int
    channels: int
    attributes: SfmAttributes

    def __post_init__(self):
        if self.layers < 1 or self.channels < 1:
            raise ManifestError(f"{self.name}: layers/channels must be positive")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    listener_id: str
    system_id: str
    score: float
    feature_path: str
    audiogram: Audiogram

    def __post_init__(self):
        if not self.listener_id:
            raise ManifestError(f"sample {self.sample_id!r}: empty listener_id")
        if not (0.0 <= self.score <= 100.0):
            raise ManifestError(
                f"sample {self.sample_id!r}: score {self.score} outside [0, 100]"
            )


@dataclass
class Manifest:
    sfm: SfmDescriptor
    audiogram_frequencies: tuple[float, ...]
    samples: list[Sample]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        self.audiogram_frequencies = tuple(float(f) for f in self.audiogram_frequencies)
        bins = len(self.audiogram_frequencies)
        for s in self.samples:
            if s.audiogram.bins != bins:
                raise ManifestError(
                    f"sample {s.sample_id!r}: audiogram has {s.audiogram.bins} bins, "
                    f"manifest declares {bins} frequencies"
                )
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ManifestError("duplicate sample ids in manifest")

    def feature_file(self, sample: Sample) -> Path:
        return self.root / sample.feature_path

    def by_id(self) -> dict[str, Sample]:
        return {s.sample_id: s for s in self.samples}

    def listener_ids(self) -> list[str]:
        return sorted({s.listener_id for s in self.samples})


def _descriptor_to_dict(sfm: SfmDescriptor) -> dict:
    return {
        "name": sfm.name,
        "layers": sfm.layers,
        "channels": sfm.channels,
        "attributes": {
            "asr_wer": sfm.attributes.asr_wer,
            "data_hours": sfm.attributes.data_hours,
            "arch_date": sfm.attributes.arch_date,
            "train_task_count": sfm.attributes.train_task_count,
        },
    }


def descriptor_from_dict(doc: dict) -> SfmDescriptor:
    try:
        attrs = doc["attributes"]
        return SfmDescriptor(
            name=doc["name"],
            layers=int(doc["layers"]),
            channels=int(doc["channels"]),
            attributes=SfmAttributes(
                asr_wer=float(attrs["asr_wer"]),
                data_hours=float(attrs["data_hours"]),
                arch_date=str(attrs["arch_date"]),
                train_task_count=int(attrs["train_task_count"]),
            ),
        )
    except KeyError as exc:
        raise ManifestError(f"sfm descriptor missing field {exc}") from exc


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    doc = {
        "sfm": _descriptor_to_dict(manifest.sfm),
        "audiogram_frequencies": list(manifest.audiogram_frequencies),
        "samples": [
            {
                "sample_id": s.sample_id,
                "listener_id": s.listener_id,
                "system_id": s.system_id,
                "score": s.score,
                "feature_path": s.feature_path,
                "audiogram": {"left": list(s.audiogram.left), "right": list(s.audiogram.right)},
            }
            for s in manifest.samples
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_manifest(path: str | Path, check_features: bool = True) -> Manifest:
    """Parse and validate a manifest document.

    With `check_features`, every referenced feature file must exist
    (contents are validated lazily by the reader on first access).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    try:
        samples = [
            Sample(
                sample_id=str(s["sample_id"]),
                listener_id=str(s["listener_id"]),
                system_id=str(s["system_id"]),
                score=float(s["score"]),
                feature_path=str(s["feature_path"]),
                audiogram=Audiogram(left=s["audiogram"]["left"], right=s["audiogram"]["right"]),
            )
            for s in doc["samples"]
        ]
        manifest = Manifest(
            sfm=descriptor_from_dict(doc["sfm"]),
            audiogram_frequencies=tuple(doc["audiogram_frequencies"]),
            samples=samples,
            root=path.parent,
        )
    except KeyError as exc:
        raise ManifestError(f"{path}: missing field {exc}") from exc
    if check_features:
        for s in manifest.samples:
            f = manifest.feature_file(s)
            if not f.is_file():
                raise ManifestError(f"{path}: feature file missing for {s.sample_id!r}: {f}")
    return manifest
