"""Training losses."""
from __future__ import annotations

from sfmprobe.exceptions import DomainError, ShapeError
from sfmprobe.numerics.tensor import Tensor, as_tensor, huber_elementwise


def huber_loss(pred, target, delta: float = 1.0) -> Tensor:
    """Mean Huber penalty of pred - target.

    Quadratic (0.5*e^2) for |e| <= delta, linear (delta*(|e| - delta/2))
    beyond; value and first derivative are continuous at the seam.
    """
    pred = as_tensor(pred)
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise DomainError("huber_loss of empty vectors")
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return huber_elementwise(pred - target, delta).mean()
