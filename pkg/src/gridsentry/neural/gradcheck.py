"""Central-difference gradient oracle for every differentiable model."""

from __future__ import annotations

import numpy as np

from .losses import mse, softmax_cross_entropy


def _loss_value(model, x, target, loss, mask):
    out = model.forward(x)
    if loss == "mse":
        return mse(out, target, mask=mask)[0]
    if loss == "cross_entropy":
        return softmax_cross_entropy(out, target)[0]
    raise ValueError(f"unknown loss '{loss}'")


def grad_check(model, x: np.ndarray, target: np.ndarray, loss: str = "mse",
               mask: np.ndarray | None = None, step: float = 1e-5) -> float:
    """Max relative error between analytic and numeric parameter gradients.

    relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    O(#params) loss evaluations; intended for small test instances.
    """
    out = model.forward(x)
    if loss == "mse":
        _, grad = mse(out, target, mask=mask)
    else:
        _, grad, _ = softmax_cross_entropy(out, target)
    model.zero_grad()
    model.backward(grad)
    analytic = {name: grads[k].copy()
                for name, _, grads, k in model.parameters()}

    worst = 0.0
    for name, params, _, k in model.parameters():
        flat = params[k].ravel()
        num = np.empty_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = _loss_value(model, x, target, loss, mask)
            flat[j] = orig - step
            down = _loss_value(model, x, target, loss, mask)
            flat[j] = orig
            num[j] = (up - down) / (2 * step)
        ana = analytic[name].ravel()
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
        worst = max(worst, float(np.max(np.abs(ana - num) / denom)))
    return worst
