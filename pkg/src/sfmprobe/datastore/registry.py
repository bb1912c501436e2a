"""Static registry of the five studied speech foundation models.

WER / data hours / architecture date / task counts follow the published
comparison. Encoder depth and width are taken from the respective model
cards; they gate exporter-side validation only, and callers may register
corrected descriptors via `register`.
"""
from __future__ import annotations

from sfmprobe.datastore.manifest import SfmAttributes, SfmDescriptor
from sfmprobe.exceptions import DomainError

_REGISTRY: dict[str, SfmDescriptor] = {}


def register(descriptor: SfmDescriptor, overwrite: bool = False) -> None:
    if descriptor.name in _REGISTRY and not overwrite:
        raise DomainError(f"SFM {descriptor.name!r} already registered")
    _REGISTRY[descriptor.name] = descriptor


def get_sfm(name: str) -> SfmDescriptor:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown SFM {name!r}; registered: {sorted(_REGISTRY)}") from None


def registered_sfms() -> list[SfmDescriptor]:
    return [_REGISTRY[name] for name in sorted(_REGISTRY)]


for _d in (
    SfmDescriptor(
        name="canary",
        layers=24,
        channels=1024,
        attributes=SfmAttributes(
            asr_wer=6.50, data_hours=86_000, arch_date="2023.09", train_task_count=2
        ),
    ),
    SfmDescriptor(
        name="parakeet",
        layers=42,
        channels=1024,
        attributes=SfmAttributes(
            asr_wer=7.01, data_hours=64_000, arch_date="2023.09", train_task_count=1
        ),
    ),
    SfmDescriptor(
        name="owsm",
        layers=18,
        channels=1024,
        attributes=SfmAttributes(
            asr_wer=7.70, data_hours=180_000, arch_date="2022.10", train_task_count=4
        ),
    ),
    SfmDescriptor(
        name="whisper",
        layers=32,
        channels=1280,
        attributes=SfmAttributes(
            asr_wer=7.44, data_hours=5_000_000, arch_date="2020.05", train_task_count=4
        ),
    ),
    SfmDescriptor(
        name="phi4",
        layers=24,
        channels=1024,
        attributes=SfmAttributes(
            asr_wer=6.14, data_hours=2_000_000, arch_date="2017.06", train_task_count=1
        ),
    ),
):
    register(_d)
