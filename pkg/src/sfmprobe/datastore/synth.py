"""Synthetic dataset with a planted informative layer.

Every layer carries a per-sample latent vector plus frame noise, but
only the designated layer's latent enters the score:

    score = clip(50 + w . pooled(informative layer) + noise, 0, 100)

where pooled() is the ear-and-frame mean of the stored (float32)
features. The other layers' latents are drawn independently of the
score, so they are pure distractors: per-layer probing has a known
right answer, an affine model on the informative layer attains RMSE
equal to the noise level, and fusing all layers can only add
estimation variance.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sfmprobe.datastore.format import LayerFeatureTensor, write_feature_file
from sfmprobe.datastore.manifest import (
    Audiogram,
    Manifest,
    Sample,
    SfmAttributes,
    SfmDescriptor,
    write_manifest,
)
from sfmprobe.exceptions import DomainError

DEFAULT_FREQUENCIES = (250.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0)


@dataclass(frozen=True)
class SynthResult:
    manifest_path: Path
    manifest: Manifest
    informative_layer: int
    clipped: int


def synth_dataset(
    out_dir: str | Path,
    n_samples: int,
    layers: int,
    frames: int,
    channels: int,
    noise_sd: float,
    seed: int,
    informative_layer: int | None = None,
    audio_bins: int = 8,
    n_listeners: int = 12,
    n_systems: int = 4,
    frame_noise_sd: float = 0.5,
    score_spread: float = 12.0,
) -> SynthResult:
    """Generate feature files plus a manifest under `out_dir`.

    Deterministic given `seed`. `score_spread` is the standard deviation
    of the planted linear term; at the default the clip at [0, 100] is
    ~4 sigma away and essentially never active.
    """
    if min(n_samples, layers, frames, channels, audio_bins) < 1:
        raise DomainError("all dataset dimensions must be positive")
    if n_listeners < 3:
        raise DomainError("need >= 3 listeners for downstream splitting")
    if informative_layer is None:
        informative_layer = layers // 2
    if not (0 <= informative_layer < layers):
        raise DomainError(f"informative layer {informative_layer} outside [0, {layers})")

    out_dir = Path(out_dir)
    feature_dir = out_dir / "features"
    feature_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(np.random.PCG64(seed))
    frequencies = tuple(DEFAULT_FREQUENCIES[:audio_bins]) if audio_bins <= len(
        DEFAULT_FREQUENCIES
    ) else tuple(float(f) for f in np.linspace(250, 8000, audio_bins))

    listeners = [f"lis{i:02d}" for i in range(n_listeners)]
    audiograms = {}
    for lid in listeners:
        left = np.clip(np.sort(rng.uniform(0.0, 70.0, size=audio_bins)), -10, 120)
        right = np.clip(left + rng.normal(0.0, 5.0, size=audio_bins), -10, 120)
        audiograms[lid] = Audiogram(left=tuple(left), right=tuple(right))

    w = rng.normal(size=channels)
    w *= score_spread / np.linalg.norm(w)

    samples = []
    clipped = 0
    for i in range(n_samples):
        sample_id = f"s{i:05d}"
        lid = listeners[i % n_listeners]
        sys_id = f"sys{i % n_systems}"
        feats = np.empty((2, layers, frames, channels))
        for layer in range(layers):
            latent = rng.normal(size=channels)
            feats[:, layer] = latent[None, None, :] + frame_noise_sd * rng.normal(
                size=(2, frames, channels)
            )
        feats32 = feats.astype(np.float32)
        pooled = feats32[:, informative_layer].astype(np.float64).mean(axis=(0, 1))
        raw = 50.0 + pooled @ w + noise_sd * rng.normal()
        score = float(np.clip(raw, 0.0, 100.0))
        if score != raw:
            clipped += 1
        rel = f"features/{sample_id}.sfmf"
        write_feature_file(LayerFeatureTensor(values=feats32), out_dir / rel)
        samples.append(
            Sample(
                sample_id=sample_id,
                listener_id=lid,
                system_id=sys_id,
                score=score,
                feature_path=rel,
                audiogram=audiograms[lid],
            )
        )

    sfm = SfmDescriptor(
        name="synth",
        layers=layers,
        channels=channels,
        attributes=SfmAttributes(
            asr_wer=0.0, data_hours=0.0, arch_date="2000.01", train_task_count=0
        ),
    )
    manifest = Manifest(
        sfm=sfm,
        audiogram_frequencies=frequencies,
        samples=samples,
        root=out_dir,
    )
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest, manifest_path)
    return SynthResult(
        manifest_path=manifest_path,
        manifest=manifest,
        informative_layer=informative_layer,
        clipped=clipped,
    )
