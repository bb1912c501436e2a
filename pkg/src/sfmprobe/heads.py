"""The three prediction-head architectures.

Each maps (layer features, audiogram) to one intelligibility score:

* WA_TGP - per-layer projection, temporal global pooling, softmax-
  weighted fusion of {layer feature(s), projected audiogram}, ear
  average, linear output.
* WA_TT  - like WA_TGP but each projected layer runs through factor
  pooling and a temporal transformer before fusion.
* DT     - temporal transformer per layer, then a second (layer-wise)
  transformer over the {layer tokens, audiogram token} sequence.

All parameters are shared across ears; the two ear vectors are averaged
right before the output projection, which makes every head exactly
symmetric under an ear swap. The softmax over fusion logits keeps layer
weights a convex combination.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from sfmprobe.datastore.format import LayerFeatureTensor, fnv1a64
from sfmprobe.datastore.manifest import Audiogram, SfmDescriptor
from sfmprobe.exceptions import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    ShapeError,
    TruncatedFileError,
    VersionError,
)
from sfmprobe.numerics import (
    ParamSet,
    Tensor,
    concat,
    global_mean_pool,
    init_transformer,
    linear,
    no_grad,
    softmax,
    temporal_pool,
    transformer_forward,
)

ALL_LAYERS = "all"
DIM_GRID = (192, 384, 768, 1536)


class Arch(str, Enum):
    WA_TGP = "wa_tgp"
    WA_TT = "wa_tt"
    DT = "dt"


@dataclass(frozen=True)
class HeadConfig:
    arch: Arch
    layer_mode: int | str = ALL_LAYERS
    embed_dim: int = 384
    pool_factor: int = 20
    depth: int = 2
    n_heads: int = 4
    ff_mult: int = 4
    positional: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.pool_factor < 1:
            raise ConfigError(f"pool_factor must be >= 1, got {self.pool_factor}")
        if isinstance(self.layer_mode, str):
            if self.layer_mode != ALL_LAYERS:
                raise ConfigError(f"layer_mode must be an index or {ALL_LAYERS!r}")
        elif self.layer_mode < 0:
            raise ConfigError(f"layer index must be >= 0, got {self.layer_mode}")
        if self.arch is not Arch.WA_TGP:
            if self.embed_dim % self.n_heads != 0:
                raise ConfigError(
                    f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
                )

    @property
    def single_layer(self) -> int | None:
        return None if self.layer_mode == ALL_LAYERS else int(self.layer_mode)

    def layer_tag(self) -> str:
        return ALL_LAYERS if self.single_layer is None else f"k{self.single_layer}"

    def identity(self, sfm_name: str = "") -> str:
        prefix = f"sfm={sfm_name}|" if sfm_name else ""
        return f"{prefix}arch={self.arch.value}|layer={self.layer_tag()}|dim={self.embed_dim}"


def selected_layer_count(config: HeadConfig, total_layers: int) -> int:
    if config.single_layer is None:
        return total_layers
    if config.single_layer >= total_layers:
        raise ConfigError(
            f"layer index {config.single_layer} out of range for L={total_layers}"
        )
    return 1


def init_head(config: HeadConfig, sfm: SfmDescriptor, audio_bins: int = 8) -> ParamSet:
    """Deterministic parameter initialization from config.seed.

    Fusion logits start at zero (uniform weights after softmax); the
    output bias starts at mid-scale 50.
    """
    n_sel = selected_layer_count(config, sfm.layers)
    c, d, f = sfm.channels, config.embed_dim, audio_bins
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    params = ParamSet()
    params.add("proj.w", rng.normal(0.0, 1.0 / math.sqrt(c), size=(n_sel, c, d)))
    params.add("proj.b", np.zeros((n_sel, 1, d)))
    params.add("audio.w", rng.normal(0.0, 1.0 / math.sqrt(f), size=(f, d)))
    params.add("audio.b", np.zeros(d))
    if config.arch in (Arch.WA_TGP, Arch.WA_TT):
        params.add("fusion.logits", np.zeros(n_sel + 1))
    if config.arch in (Arch.WA_TT, Arch.DT):
        init_transformer(params, "tt.", d, config.depth, config.ff_mult, rng)
    if config.arch is Arch.DT:
        init_transformer(params, "lt.", d, config.depth, config.ff_mult, rng)
    params.add("out.w", rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, 1)))
    params.add("out.b", np.full(1, 50.0))
    return params


# -- forward passes -----------------------------------------------------------


def _check_dims(feats: np.ndarray, audio: np.ndarray, params: ParamSet, config: HeadConfig):
    n_sel, c, d = params["proj.w"].shape
    if feats.shape[2] != n_sel or feats.shape[4] != c:
        raise ShapeError(
            f"features [N,2,L',T,C]={feats.shape} incompatible with projection "
            f"(L'={n_sel}, C={c})"
        )
    f = params["audio.w"].shape[0]
    if audio.shape[-1] != f:
        raise ShapeError(f"audiogram has {audio.shape[-1]} bins, head expects {f}")
    if d != config.embed_dim:
        raise ShapeError(f"params built for dim {d}, config says {config.embed_dim}")


def _audio_vector(audio: Tensor, params: ParamSet) -> Tensor:
    # [N,2,F] -> [N,2,1,d]
    n, ears, _ = audio.shape
    out = linear(audio, params["audio.w"], params["audio.b"])
    return out.reshape(n, ears, 1, out.shape[-1])


def _fused_weighted_average(items: Tensor, params: ParamSet) -> Tensor:
    # items [N,2,M,d] -> convex combination over M -> [N,2,d]
    weights = softmax(params["fusion.logits"], axis=-1)
    m = items.shape[2]
    return (items * weights.reshape(m, 1)).sum(axis=2)


def _output(ear_vectors: Tensor, params: ParamSet) -> Tensor:
    # [N,2,d] -> ear average -> [N]
    avg = ear_vectors.mean(axis=1)
    score = linear(avg, params["out.w"], params["out.b"])
    return score.reshape(score.shape[0])


def _project(feats: Tensor, params: ParamSet) -> Tensor:
    # [N,2,L',T,C] @ [L',C,d] -> [N,2,L',T,d]
    return feats.matmul(params["proj.w"]) + params["proj.b"]


def _temporal_tokens(feats: Tensor, params: ParamSet, config: HeadConfig) -> Tensor:
    # project, factor-pool, temporal transformer, global mean -> [N,2,L',d]
    x = _project(feats, params)
    x = temporal_pool(x, config.pool_factor)
    x = transformer_forward(x, params, "tt.", config.depth, config.n_heads, config.positional)
    return global_mean_pool(x)


def head_apply(feats: Tensor, audio: Tensor, params: ParamSet, config: HeadConfig) -> Tensor:
    """Differentiable batched forward.

    feats: [N, 2, L', T, C] with L' the selected layer count;
    audio: [N, 2, F]. Returns scores [N].
    """
    feats = feats if isinstance(feats, Tensor) else Tensor(feats)
    audio = audio if isinstance(audio, Tensor) else Tensor(audio)
    _check_dims(feats.data, audio.data, params, config)
    if config.arch is Arch.WA_TGP:
        pooled = global_mean_pool(_project(feats, params))      # [N,2,L',d]
        items = concat([pooled, _audio_vector(audio, params)], axis=2)
        return _output(_fused_weighted_average(items, params), params)
    if config.arch is Arch.WA_TT:
        tokens = _temporal_tokens(feats, params, config)        # [N,2,L',d]
        items = concat([tokens, _audio_vector(audio, params)], axis=2)
        return _output(_fused_weighted_average(items, params), params)
    if config.arch is Arch.DT:
        seq = build_layer_token_sequence(feats, audio, params, config)
        seq = transformer_forward(seq, params, "lt.", config.depth, config.n_heads)
        return _output(seq.mean(axis=2), params)
    raise ConfigError(f"unknown arch {config.arch}")


def build_layer_token_sequence(
    feats: Tensor, audio: Tensor, params: ParamSet, config: HeadConfig
) -> Tensor:
    """DT input sequence: one token per selected layer plus the audiogram
    token, [N, 2, L'+1, d]."""
    tokens = _temporal_tokens(feats, params, config)
    return concat([tokens, _audio_vector(audio, params)], axis=2)


def _single_batch(x: LayerFeatureTensor, a: Audiogram, config: HeadConfig):
    feats = select_layers(x.values, config)
    return (
        Tensor(feats[None].astype(np.float64)),
        Tensor(a.as_array()[None]),
    )


def select_layers(values: np.ndarray, config: HeadConfig) -> np.ndarray:
    """Pick the configured layer slice from [2, L, T, C] values."""
    k = config.single_layer
    if k is None:
        return values
    if k >= values.shape[1]:
        raise ShapeError(f"layer index {k} out of range for L={values.shape[1]}")
    return values[:, k:k + 1]


def _forward_single(x: LayerFeatureTensor, a: Audiogram, params: ParamSet, config: HeadConfig) -> float:
    feats, audio = _single_batch(x, a, config)
    with no_grad():
        return float(head_apply(feats, audio, params, config).data[0])


def forward_wa_tgp(x, a, params, config: HeadConfig) -> float:
    if config.arch is not Arch.WA_TGP:
        raise ConfigError(f"forward_wa_tgp called with arch {config.arch}")
    return _forward_single(x, a, params, config)


def forward_wa_tt(x, a, params, config: HeadConfig) -> float:
    if config.arch is not Arch.WA_TT:
        raise ConfigError(f"forward_wa_tt called with arch {config.arch}")
    return _forward_single(x, a, params, config)


def forward_dt(x, a, params, config: HeadConfig) -> float:
    if config.arch is not Arch.DT:
        raise ConfigError(f"forward_dt called with arch {config.arch}")
    return _forward_single(x, a, params, config)


def head_forward(
    features: Sequence[LayerFeatureTensor],
    audiograms: Sequence[Audiogram],
    params: ParamSet,
    config: HeadConfig,
) -> np.ndarray:
    """Vectorized, order-preserving batch forward (inference only).

    Samples may differ in frame count; equal-length groups are batched
    together and results are reassembled in input order.
    """
    if len(features) != len(audiograms):
        raise ShapeError("features and audiograms must align")
    n = len(features)
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    dims = {(x.layers, x.channels) for x in features}
    if len(dims) != 1:
        raise ShapeError(f"heterogeneous feature dims in batch: {sorted(dims)}")
    by_frames: dict[int, list[int]] = {}
    for i, x in enumerate(features):
        by_frames.setdefault(x.frames, []).append(i)
    with no_grad():
        for idx in by_frames.values():
            feats = np.stack(
                [select_layers(features[i].values, config) for i in idx]
            ).astype(np.float64)
            audio = np.stack([audiograms[i].as_array() for i in idx])
            scores = head_apply(Tensor(feats), Tensor(audio), params, config).data
            out[idx] = scores
    return out


# -- checkpoint container ------------------------------------------------------

_HEAD_MAGIC = b"HEAD"
_HEAD_VERSION = 1


def save_checkpoint(path: str | Path, config: HeadConfig, params: ParamSet) -> None:
    """Versioned binary container: config JSON + named float64 tensors.

    Same container conventions as the feature format (little-endian,
    magic/version header, trailing FNV-1a checksum over the payload);
    parameters are stored at full precision so a reloaded head
    reproduces recorded metrics exactly.
    """
    cfg = {
        "arch": config.arch.value,
        "layer_mode": config.layer_mode,
        "embed_dim": config.embed_dim,
        "pool_factor": config.pool_factor,
        "depth": config.depth,
        "n_heads": config.n_heads,
        "ff_mult": config.ff_mult,
        "positional": config.positional,
        "seed": config.seed,
    }
    cfg_bytes = json.dumps(cfg, sort_keys=True).encode()
    chunks = [_HEAD_MAGIC, struct.pack("<I", _HEAD_VERSION)]
    chunks.append(struct.pack("<I", len(cfg_bytes)))
    chunks.append(cfg_bytes)
    chunks.append(struct.pack("<I", len(params)))
    payload_parts = []
    for name, tensor in params.items():
        name_bytes = name.encode()
        arr = np.ascontiguousarray(tensor.data, dtype="<f8")
        chunks.append(struct.pack("<I", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        data = arr.tobytes()
        chunks.append(data)
        payload_parts.append(data)
    chunks.append(struct.pack("<Q", fnv1a64(b"".join(payload_parts))))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[HeadConfig, ParamSet]:
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(raw):
            raise TruncatedFileError(f"{path}: truncated at byte {pos}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != _HEAD_MAGIC:
        raise BadMagicError(f"{path}: bad magic")
    (version,) = struct.unpack("<I", take(4))
    if version != _HEAD_VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    (cfg_len,) = struct.unpack("<I", take(4))
    cfg = json.loads(bytes(take(cfg_len)).decode())
    config = HeadConfig(
        arch=Arch(cfg["arch"]),
        layer_mode=cfg["layer_mode"],
        embed_dim=cfg["embed_dim"],
        pool_factor=cfg["pool_factor"],
        depth=cfg["depth"],
        n_heads=cfg["n_heads"],
        ff_mult=cfg["ff_mult"],
        positional=cfg["positional"],
        seed=cfg["seed"],
    )
    (n_params,) = struct.unpack("<I", take(4))
    params = ParamSet()
    payload_parts = []
    for _ in range(n_params):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode()
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = take(8 * count)
        payload_parts.append(bytes(data))
        params.add(name, np.frombuffer(data, dtype="<f8").reshape(shape).copy())
    (stored,) = struct.unpack("<Q", take(8))
    if pos != len(raw):
        raise TruncatedFileError(f"{path}: {len(raw) - pos} trailing bytes")
    actual = fnv1a64(b"".join(payload_parts))
    if stored != actual:
        raise ChecksumError(f"{path}: checksum mismatch")
    return config, params


def with_seed(config: HeadConfig, seed: int) -> HeadConfig:
    return replace(config, seed=seed)
