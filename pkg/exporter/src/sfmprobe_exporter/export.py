"""Export jobs: run an encoder over per-ear audio and emit SFMF files
plus a manifest, or generate synthetic features for CI."""
from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sfmprobe_exporter.adapters import adapter_for
from sfmprobe_exporter.registry import SfmEntry, get_entry
from sfmprobe_exporter.wire import ExportError, write_feature_file, write_manifest

DEFAULT_FREQUENCIES = [250.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0]


@dataclass(frozen=True)
class ClipSpec:
    sample_id: str
    left_audio: str
    right_audio: str
    listener_id: str
    system_id: str
    score: float
    audiogram_left: tuple[float, ...]
    audiogram_right: tuple[float, ...]


@dataclass(frozen=True)
class ExportJob:
    sfm: str
    clips: list[ClipSpec]
    out_dir: Path

    def __post_init__(self):
        for clip in self.clips:
            for path in (clip.left_audio, clip.right_audio):
                if not Path(path).is_file():
                    raise ExportError(f"{clip.sample_id}: audio missing: {path}")


def read_wav_mono(path: str | Path) -> tuple[np.ndarray, int]:
    """16-bit PCM wave -> float32 waveform in [-1, 1] plus sample rate."""
    with wave.open(str(path), "rb") as fh:
        if fh.getsampwidth() != 2:
            raise ExportError(f"{path}: expected 16-bit PCM")
        if fh.getnchannels() != 1:
            raise ExportError(f"{path}: expected per-ear mono audio")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return pcm.astype(np.float32) / 32768.0, rate


def load_job_csv(sfm: str, csv_path: str | Path, out_dir: str | Path) -> ExportJob:
    """Job CSV columns: sample_id, left_audio, right_audio, listener_id,
    system_id, score, audiogram_left, audiogram_right (thresholds are
    '|'-separated dB HL values). Audio paths are relative to the CSV."""
    csv_path = Path(csv_path)
    base = csv_path.parent
    clips = []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            clips.append(
                ClipSpec(
                    sample_id=row["sample_id"],
                    left_audio=str(base / row["left_audio"]),
                    right_audio=str(base / row["right_audio"]),
                    listener_id=row["listener_id"],
                    system_id=row.get("system_id", "unknown"),
                    score=float(row["score"]),
                    audiogram_left=tuple(float(x) for x in row["audiogram_left"].split("|")),
                    audiogram_right=tuple(float(x) for x in row["audiogram_right"].split("|")),
                )
            )
    if not clips:
        raise ExportError(f"{csv_path}: no clips")
    return ExportJob(sfm=sfm, clips=clips, out_dir=Path(out_dir))


def _sample_entry(clip: ClipSpec, rel_path: str) -> dict:
    return {
        "sample_id": clip.sample_id,
        "listener_id": clip.listener_id,
        "system_id": clip.system_id,
        "score": clip.score,
        "feature_path": rel_path,
        "audiogram": {
            "left": list(clip.audiogram_left),
            "right": list(clip.audiogram_right),
        },
    }


def export(job: ExportJob, adapter=None, entry: SfmEntry | None = None) -> Path:
    """Run the encoder over both ears of every clip and write one SFMF
    per sample plus the manifest. Aborts (does not truncate) if the
    checkpoint's layer/channel counts disagree with the registry."""
    entry = entry or get_entry(job.sfm)
    adapter = adapter or adapter_for(entry)
    if (adapter.layers, adapter.channels) != (entry.layers, entry.channels):
        raise ExportError(
            f"{entry.name}: checkpoint yields {adapter.layers} layers x "
            f"{adapter.channels} channels, registry declares "
            f"{entry.layers} x {entry.channels}; aborting export"
        )
    feature_dir = job.out_dir / "features"
    feature_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    bins = len(job.clips[0].audiogram_left)
    for clip in job.clips:
        ears = []
        for path in (clip.left_audio, clip.right_audio):
            waveform, rate = read_wav_mono(path)
            ears.append(adapter.layer_features(waveform, rate))
        left, right = ears
        if left.shape != right.shape:
            raise ExportError(f"{clip.sample_id}: ear feature shapes differ")
        values = np.stack([left, right]).astype(np.float32)
        rel = f"features/{clip.sample_id}.sfmf"
        write_feature_file(values, job.out_dir / rel)
        samples.append(_sample_entry(clip, rel))
    frequencies = DEFAULT_FREQUENCIES[:bins] if bins <= len(DEFAULT_FREQUENCIES) else [
        float(f) for f in np.linspace(250, 8000, bins)
    ]
    return write_manifest(
        job.out_dir / "manifest.json", entry.descriptor(), frequencies, samples
    )


def export_synthetic(
    out_dir: str | Path,
    n_samples: int = 8,
    layers: int = 3,
    frames: int = 40,
    channels: int = 8,
    seed: int = 0,
    audio_bins: int = 8,
) -> Path:
    """Checkpoint-free export exercising the exact wire formats; CI uses
    this to prove boundary compatibility without model downloads."""
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n_samples):
        sample_id = f"x{i:05d}"
        values = rng.normal(size=(2, layers, frames, channels)).astype(np.float32)
        rel = f"features/{sample_id}.sfmf"
        write_feature_file(values, out_dir / rel)
        thresholds = np.clip(np.sort(rng.uniform(0, 70, audio_bins)), -10, 120)
        clip = ClipSpec(
            sample_id=sample_id,
            left_audio="", right_audio="",
            listener_id=f"lis{i % max(3, n_samples // 2):02d}",
            system_id="synthetic",
            score=float(np.clip(rng.normal(50, 12), 0, 100)),
            audiogram_left=tuple(thresholds),
            audiogram_right=tuple(np.clip(thresholds + rng.normal(0, 5, audio_bins), -10, 120)),
        )
        samples.append(_sample_entry(clip, rel))
    descriptor = {
        "name": "synth-export",
        "layers": layers,
        "channels": channels,
        "attributes": {"asr_wer": 0.0, "data_hours": 0.0,
                       "arch_date": "2000.01", "train_task_count": 0},
    }
    frequencies = DEFAULT_FREQUENCIES[:audio_bins] if audio_bins <= 8 else [
        float(f) for f in np.linspace(250, 8000, audio_bins)
    ]
    return write_manifest(out_dir / "manifest.json", descriptor, frequencies, samples)
