"""Tour of the differentiable compute core.

Builds a few tensors, backpropagates through composed ops, and verifies
reverse-mode gradients against central finite differences — the same
harness every head architecture has to pass.
"""
import numpy as np

from sfmprobe.numerics import (
    ParamSet,
    Tensor,
    grad_check,
    huber_loss,
    init_transformer,
    softmax,
    transformer_block_forward,
)

rng = np.random.default_rng(0)

print("== reverse-mode basics ==")
params = ParamSet()
w = params.add("w", rng.normal(size=(3, 2)))
x = Tensor(rng.normal(size=(5, 3)))
loss = huber_loss((x.matmul(w)).reshape(10), np.zeros(10), delta=1.0)
loss.backward()
print(f"loss = {loss.item():.4f}")
print(f"dloss/dw (shape {w.grad.shape}):\n{np.round(w.grad, 4)}")

print()
print("== gradient check: composed ops ==")
params = ParamSet()
params.add("a", rng.normal(size=(4, 4)))
err = grad_check(lambda p: softmax(p["a"], axis=-1).sum(axis=0).mean(), params)
print(f"softmax-mean pipeline: max relative error {err:.2e}")

print()
print("== gradient check: a full transformer block ==")
params = ParamSet()
init_transformer(params, "", dim=8, depth=1, ff_mult=4, rng=rng)
seq = params.add("seq", rng.normal(size=(6, 8)))
err = grad_check(
    lambda p: transformer_block_forward(p["seq"], p, n_heads=2).sum(), params,
    max_coords_per_param=20, rng=np.random.default_rng(1),
)
print(f"pre-norm block (attention + feed-forward): max relative error {err:.2e}")

print()
print("== huber loss: quadratic near zero, linear in the tails ==")
for e in (0.25, 1.0, 4.0):
    value = huber_loss([e], [0.0], delta=1.0).item()
    print(f"  error {e:>4}: penalty {value:.4f}")
