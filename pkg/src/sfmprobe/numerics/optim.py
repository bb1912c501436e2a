"""Adam optimizer and epoch-granular learning-rate schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sfmprobe.exceptions import ConfigError, DomainError, NonFiniteGradientError
from sfmprobe.numerics.params import ParamSet

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.98
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        m = {name: np.zeros_like(t.data) for name, t in params.items() if params.is_trainable(name)}
        v = {name: np.zeros_like(t.data) for name, t in params.items() if params.is_trainable(name)}
        return cls(m=m, v=v, t=0)


def adam_step(
    params: ParamSet,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update, applied in place.

    The whole update is rejected (nothing mutated) if any gradient is
    non-finite, naming the offending parameter.
    """
    for name, g in grads.items():
        if name not in state.m:
            raise ConfigError(f"gradient for unknown parameter {name!r}")
        if g.shape != state.m[name].shape:
            raise ConfigError(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        step = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        params[name].data -= step
    return params, state


@dataclass(frozen=True)
class ScheduleSpec:
    """Learning-rate schedule: pure cosine, or linear warmup into cosine.

    Stepped once per epoch; `lr_at(spec, e)` is the rate used throughout
    epoch `e`.
    """

    kind: str  # "cosine" | "warmup-cosine"
    base_lr: float
    min_lr: float
    total_epochs: int
    warmup_epochs: int = 0
    start_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("cosine", "warmup-cosine"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not (0 < self.min_lr <= self.base_lr):
            raise ConfigError("need 0 < min_lr <= base_lr")
        if not (0 <= self.warmup_epochs < self.total_epochs):
            raise ConfigError("need 0 <= warmup_epochs < total_epochs")
        if not (0 < self.start_factor <= 1):
            raise ConfigError("need 0 < start_factor <= 1")
        if self.kind == "cosine" and self.warmup_epochs != 0:
            raise ConfigError("pure cosine schedule cannot have warmup epochs")


def lr_at(spec: ScheduleSpec, epoch: int) -> float:
    """Learning rate for `epoch` in [0, total_epochs]."""
    if epoch < 0 or epoch > spec.total_epochs:
        raise DomainError(f"epoch {epoch} outside [0, {spec.total_epochs}]")
    warmup = spec.warmup_epochs if spec.kind == "warmup-cosine" else 0
    if epoch < warmup:
        frac = epoch / warmup
        return spec.base_lr * (spec.start_factor + (1.0 - spec.start_factor) * frac)
    progress = (epoch - warmup) / (spec.total_epochs - warmup)
    return spec.min_lr + 0.5 * (spec.base_lr - spec.min_lr) * (1.0 + math.cos(math.pi * progress))
