"""Model adapters: waveform in, per-layer encoder hidden states out.

Only the Whisper family is runnable here (via transformers); the NeMo
and ESPnet backed models need their own toolkits and raise a clear
error instead. Decoder layers are never captured: the downstream heads
consume encoder representations only.
"""
from __future__ import annotations

import numpy as np

from sfmprobe_exporter.registry import SfmEntry
from sfmprobe_exporter.wire import ExportError

SAMPLE_RATE = 16_000


class WhisperAdapter:
    """Layer features from a Whisper-style encoder.

    The encoder consumes a fixed 30 s log-mel window (shorter audio is
    padded), so the frame count is max_source_positions (1500 for the
    published checkpoints) regardless of clip duration; factor pooling
    downstream absorbs the length.
    """

    def __init__(self, model, feature_extractor, name: str = "whisper"):
        self.name = name
        self._model = model.eval()
        self._fe = feature_extractor
        cfg = model.config
        self.layers = cfg.encoder_layers
        self.channels = cfg.d_model
        self.expected_frames = cfg.max_source_positions

    @classmethod
    def from_checkpoint(cls, checkpoint: str) -> "WhisperAdapter":
        try:
            from transformers import WhisperFeatureExtractor, WhisperModel
        except ImportError as exc:
            raise ExportError("whisper export needs the 'transformers' package") from exc
        model = WhisperModel.from_pretrained(checkpoint)
        fe = WhisperFeatureExtractor(feature_size=model.config.num_mel_bins)
        return cls(model, fe, name=checkpoint)

    @classmethod
    def from_config(cls, config, name: str = "whisper-random") -> "WhisperAdapter":
        """Randomly initialized encoder with the given architecture; used
        to validate the export path without downloading weights."""
        try:
            import torch
            from transformers import WhisperFeatureExtractor, WhisperModel
        except ImportError as exc:
            raise ExportError("whisper export needs the 'transformers' package") from exc
        torch.manual_seed(0)
        model = WhisperModel(config)
        fe = WhisperFeatureExtractor(feature_size=config.num_mel_bins)
        return cls(model, fe, name=name)

    def layer_features(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        """[layers, frames, channels] float32 for one mono waveform."""
        import torch

        if sample_rate != SAMPLE_RATE:
            raise ExportError(
                f"whisper expects {SAMPLE_RATE} Hz input, got {sample_rate}"
            )
        inputs = self._fe(waveform, sampling_rate=sample_rate, return_tensors="pt")
        with torch.no_grad():
            out = self._model.encoder(
                inputs.input_features, output_hidden_states=True
            )
        # hidden_states = (embedding output, block 1, ..., block L)
        stacked = [h[0].numpy().astype(np.float32) for h in out.hidden_states[1:]]
        feats = np.stack(stacked)
        if feats.shape[0] != self.layers or feats.shape[2] != self.channels:
            raise ExportError(
                f"checkpoint produced {feats.shape[0]} layers x {feats.shape[2]} "
                f"channels, adapter declares {self.layers} x {self.channels}"
            )
        return feats


class UnavailableAdapter:
    """Placeholder for models whose toolkit is not installed here."""

    def __init__(self, entry: SfmEntry, requirement: str):
        self.entry = entry
        self.requirement = requirement
        self.name = entry.name
        self.layers = entry.layers
        self.channels = entry.channels

    def layer_features(self, waveform, sample_rate):
        raise ExportError(
            f"{self.entry.name} export requires {self.requirement} "
            f"(checkpoint {self.entry.checkpoint!r})"
        )


def adapter_for(entry: SfmEntry):
    if entry.adapter == "whisper":
        return WhisperAdapter.from_checkpoint(entry.checkpoint)
    if entry.adapter == "nemo":
        return UnavailableAdapter(entry, "the NeMo toolkit")
    if entry.adapter == "espnet":
        return UnavailableAdapter(entry, "the ESPnet toolkit")
    if entry.adapter == "phi4":
        return UnavailableAdapter(entry, "transformers with trust_remote_code")
    raise ExportError(f"no adapter family {entry.adapter!r}")
