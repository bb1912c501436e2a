"""Descriptors of the five supported speech foundation models.

Layer/channel counts must match the consumer-side registry; exports are
aborted (never truncated) when a checkpoint disagrees with its entry.
"""
from __future__ import annotations

from dataclasses import dataclass

from sfmprobe_exporter.wire import ExportError

# Prompt used to elicit transcription from the multimodal instruct model;
# its speech-path hidden states stand in for encoder layers.
PHI4_TRANSCRIBE_PROMPT = (
    "<|user|><|audio_1|>Transcribe the audio clip into text.<|end|><|assistant|>"
)


@dataclass(frozen=True)
class SfmEntry:
    name: str
    layers: int
    channels: int
    checkpoint: str
    adapter: str  # loader family
    attributes: dict

    def descriptor(self) -> dict:
        return {
            "name": self.name,
            "layers": self.layers,
            "channels": self.channels,
            "attributes": self.attributes,
        }


_ENTRIES = {
    "canary": SfmEntry(
        name="canary", layers=24, channels=1024,
        checkpoint="nvidia/canary-1b", adapter="nemo",
        attributes={"asr_wer": 6.50, "data_hours": 86_000,
                    "arch_date": "2023.09", "train_task_count": 2},
    ),
    "parakeet": SfmEntry(
        name="parakeet", layers=42, channels=1024,
        checkpoint="nvidia/parakeet-tdt-1.1b", adapter="nemo",
        attributes={"asr_wer": 7.01, "data_hours": 64_000,
                    "arch_date": "2023.09", "train_task_count": 1},
    ),
    "owsm": SfmEntry(
        name="owsm", layers=18, channels=1024,
        checkpoint="espnet/owsm_v3.1_ebf", adapter="espnet",
        attributes={"asr_wer": 7.70, "data_hours": 180_000,
                    "arch_date": "2022.10", "train_task_count": 4},
    ),
    "whisper": SfmEntry(
        name="whisper", layers=32, channels=1280,
        checkpoint="openai/whisper-large-v3", adapter="whisper",
        attributes={"asr_wer": 7.44, "data_hours": 5_000_000,
                    "arch_date": "2020.05", "train_task_count": 4},
    ),
    "phi4": SfmEntry(
        name="phi4", layers=24, channels=1024,
        checkpoint="microsoft/Phi-4-multimodal-instruct", adapter="phi4",
        attributes={"asr_wer": 6.14, "data_hours": 2_000_000,
                    "arch_date": "2017.06", "train_task_count": 1},
    ),
}


def get_entry(name: str) -> SfmEntry:
    try:
        return _ENTRIES[name]
    except KeyError:
        raise ExportError(f"unknown SFM {name!r}; known: {sorted(_ENTRIES)}") from None


def known_sfms() -> list[str]:
    return sorted(_ENTRIES)
