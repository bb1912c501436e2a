"""Differentiable layers: linear maps, layer norm, attention, pooling.

All functions accept inputs shaped [..., tokens, dim] and broadcast over
any leading axes, so one parameter set serves every (sample, ear, layer)
stream at once.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf as _erf

from sfmprobe.exceptions import DomainError, ShapeError
from sfmprobe.numerics.params import ParamSet
from sfmprobe.numerics.tensor import Tensor, _accum, _op, as_tensor, softmax


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = as_tensor(x).matmul(w)
    if b is not None:
        y = y + b
    return y


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU; smooth everywhere, which keeps finite
    differences honest in gradient checks."""
    x = as_tensor(x)
    inner = _erf(x.data / math.sqrt(2.0))
    y = 0.5 * x.data * (1.0 + inner)
    out = _op(y, (x,))
    if out._parents:
        def backward(g, a=x, inner=inner):
            pdf = np.exp(-0.5 * a.data * a.data) / math.sqrt(2.0 * math.pi)
            _accum(a, g * (0.5 * (1.0 + inner) + a.data * pdf))
        out._backward = backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x = as_tensor(x)
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * gamma + beta


def multi_head_self_attention(
    x: Tensor,
    params: ParamSet,
    prefix: str,
    n_heads: int,
) -> Tensor:
    """Standard scaled-dot-product self-attention without masking.

    No positional information is injected here; without an explicit
    encoding the layer is permutation-equivariant over tokens.
    """
    x = as_tensor(x)
    *lead, tokens, dim = x.shape
    if dim % n_heads != 0:
        raise ShapeError(f"dim {dim} not divisible by n_heads {n_heads}")
    head_dim = dim // n_heads

    def split_heads(t: Tensor) -> Tensor:
        return t.reshape(*lead, tokens, n_heads, head_dim).swapaxes(-3, -2)

    q = split_heads(linear(x, params[prefix + "wq"], params[prefix + "bq"]))
    k = split_heads(linear(x, params[prefix + "wk"], params[prefix + "bk"]))
    v = split_heads(linear(x, params[prefix + "wv"], params[prefix + "bv"]))

    scores = q.matmul(k.swapaxes(-1, -2)) * (1.0 / math.sqrt(head_dim))
    attn = softmax(scores, axis=-1)
    ctx = attn.matmul(v).swapaxes(-3, -2).reshape(*lead, tokens, dim)
    return linear(ctx, params[prefix + "wo"], params[prefix + "bo"])


def transformer_block(x: Tensor, params: ParamSet, prefix: str, n_heads: int) -> Tensor:
    """Pre-norm block: x + MHSA(LN(x)), then x + FF(LN(x)). No dropout."""
    h = x + multi_head_self_attention(
        layer_norm(x, params[prefix + "ln1.g"], params[prefix + "ln1.b"]),
        params,
        prefix,
        n_heads,
    )
    normed = layer_norm(h, params[prefix + "ln2.g"], params[prefix + "ln2.b"])
    ff = linear(gelu(linear(normed, params[prefix + "ff1.w"], params[prefix + "ff1.b"])),
                params[prefix + "ff2.w"], params[prefix + "ff2.b"])
    return h + ff


def transformer_forward(
    x: Tensor,
    params: ParamSet,
    prefix: str,
    depth: int,
    n_heads: int,
    positional: bool = False,
) -> Tensor:
    """Stack of `depth` pre-norm blocks under `prefix` ("{prefix}b{i}.")."""
    x = as_tensor(x)
    if positional:
        x = x + sinusoidal_positions(x.shape[-2], x.shape[-1])
    for i in range(depth):
        x = transformer_block(x, params, f"{prefix}b{i}.", n_heads)
    return x


def init_transformer(
    params: ParamSet, prefix: str, dim: int, depth: int, ff_mult: int, rng: np.random.Generator
) -> None:
    """Register the parameters `transformer_forward` expects under `prefix`."""
    hidden = ff_mult * dim
    std = 1.0 / math.sqrt(dim)
    for i in range(depth):
        p = f"{prefix}b{i}."
        params.add(p + "ln1.g", np.ones(dim))
        params.add(p + "ln1.b", np.zeros(dim))
        for name in ("wq", "wk", "wv", "wo"):
            params.add(p + name, rng.normal(0.0, std, size=(dim, dim)))
            params.add(p + "b" + name[1], np.zeros(dim))
        params.add(p + "ln2.g", np.ones(dim))
        params.add(p + "ln2.b", np.zeros(dim))
        params.add(p + "ff1.w", rng.normal(0.0, std, size=(dim, hidden)))
        params.add(p + "ff1.b", np.zeros(hidden))
        params.add(p + "ff2.w", rng.normal(0.0, 1.0 / math.sqrt(hidden), size=(hidden, dim)))
        params.add(p + "ff2.b", np.zeros(dim))


def transformer_block_forward(seq: Tensor, params: ParamSet, n_heads: int = 4) -> Tensor:
    """Apply one pre-norm block (parameters under prefix "b0.") to
    [tokens x dim] input; output shape equals input shape."""
    seq = as_tensor(seq)
    dim = seq.shape[-1]
    w = params["b0.wq"]
    if w.shape[0] != dim:
        raise ShapeError(f"block built for dim {w.shape[0]}, input has dim {dim}")
    return transformer_block(seq, params, "b0.", n_heads)


def sinusoidal_positions(tokens: int, dim: int) -> np.ndarray:
    """Classic fixed sin/cos position table, [tokens x dim]."""
    pos = np.arange(tokens, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table


def temporal_pool(x: Tensor, factor: int) -> Tensor:
    """Mean over non-overlapping windows of `factor` frames (axis -2).

    A trailing partial window is averaged over its actual length, so
    short clips are not biased by padding.
    """
    x = as_tensor(x)
    if factor < 1:
        raise DomainError(f"pool factor must be >= 1, got {factor}")
    frames = x.shape[-2]
    if frames < 1:
        raise DomainError("temporal_pool requires at least one frame")
    starts = np.arange(0, frames, factor)
    lengths = np.minimum(starts + factor, frames) - starts
    sums = np.add.reduceat(x.data, starts, axis=-2)
    shape = [1] * x.ndim
    shape[-2] = len(starts)
    y = sums / lengths.reshape(shape)
    out = _op(y, (x,))
    if out._parents:
        def backward(g, a=x, lengths=lengths, shape=tuple(shape)):
            scaled = g / lengths.reshape(shape)
            _accum(a, np.repeat(scaled, lengths, axis=-2))
        out._backward = backward
    return out


def global_mean_pool(x: Tensor) -> Tensor:
    """Per-channel mean over the frame axis (-2)."""
    x = as_tensor(x)
    if x.shape[-2] < 1:
        raise DomainError("global_mean_pool requires at least one frame")
    return x.mean(axis=-2)

