"""Named parameter collections used by heads and the optimizer."""
from __future__ import annotations

import hashlib
from typing import Iterator

import numpy as np

from sfmprobe.exceptions import ShapeError
from sfmprobe.numerics.tensor import Tensor


class ParamSet:
    """Ordered map of named parameter tensors.

    Names are unique and shapes are frozen once a parameter is added;
    `adam_step` and checkpointing rely on both.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ShapeError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=trainable)
        self._params[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_data(self, name: str, value: np.ndarray) -> None:
        """Overwrite a parameter's values in place; the shape must match."""
        t = self._params[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != t.data.shape:
            raise ShapeError(
                f"parameter {name!r} has shape {t.data.shape}, got {value.shape}"
            )
        t.data = value.copy()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Collect gradients of trainable parameters (zeros where unset)."""
        out = {}
        for name, t in self._params.items():
            if not self._trainable[name]:
                continue
            out[name] = np.zeros_like(t.data) if t.grad is None else t.grad
        return out

    def copy(self) -> "ParamSet":
        dup = ParamSet()
        for name, t in self._params.items():
            dup.add(name, t.data.copy(), trainable=self._trainable[name])
        return dup

    def state_hash(self) -> str:
        """Stable digest of names, shapes and values (for determinism tests)."""
        h = hashlib.blake2b(digest_size=16)
        for name, t in self._params.items():
            h.update(name.encode())
            h.update(str(t.data.shape).encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()
