"""Finite-difference verification of reverse-mode gradients."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from sfmprobe.exceptions import DomainError
from sfmprobe.numerics.params import ParamSet
from sfmprobe.numerics.tensor import Tensor, no_grad


def grad_check(
    fn: Callable[[ParamSet], Tensor],
    params: ParamSet,
    eps: float = 1e-5,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-4,
) -> float:
    """Compare reverse-mode gradients of `fn(params)` against central
    finite differences and return the worst relative error.

    Per coordinate the error is |analytic - numeric| / max(|analytic|,
    |numeric|, floor); the floor keeps finite-difference roundoff on
    near-zero coordinates from dominating. With `max_coords_per_param`
    set, a seeded random subset of coordinates is checked per parameter
    (the full sweep is quadratic in parameter count and only affordable
    at small sizes).
    """
    params.zero_grad()
    out = fn(params)
    if out.size != 1:
        raise DomainError("grad_check requires a scalar-valued function")
    if not np.isfinite(out.data).all():
        raise DomainError("function value is not finite at the given point")
    out.backward()
    analytic = {name: np.array(g, copy=True) for name, g in params.grads().items()}

    if max_coords_per_param is not None and rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    with no_grad():
        for name in analytic:
            tensor = params[name]
            flat = tensor.data.reshape(-1)
            n = flat.size
            if max_coords_per_param is None or n <= max_coords_per_param:
                coords = range(n)
            else:
                coords = rng.choice(n, size=max_coords_per_param, replace=False)
            a_flat = analytic[name].reshape(-1)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = fn(params).item()
                flat[i] = orig - eps
                f_minus = fn(params).item()
                flat[i] = orig
                if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                    raise DomainError(f"non-finite evaluation while perturbing {name!r}")
                numeric = (f_plus - f_minus) / (2.0 * eps)
                denom = max(abs(a_flat[i]), abs(numeric), floor)
                worst = max(worst, abs(a_flat[i] - numeric) / denom)
    params.zero_grad()
    return worst
