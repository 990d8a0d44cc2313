"""Mini-batch training loop, deterministic under a fixed seed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import NumericalError
from .losses import mse, softmax_cross_entropy
from .optim import make_optimizer


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    optimizer: str = "adam"
    optimizer_kwargs: dict = field(default_factory=dict)
    patience: int | None = None  # early stop after this many non-improving epochs

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def train(model, x: np.ndarray, y: np.ndarray, config: TrainConfig,
          loss: str = "mse", mask: np.ndarray | None = None) -> list[float]:
    """Train in place; returns the per-epoch mean loss history.

    x may be (N, D) frames or (N, T, D) sequences; mask, when given for
    sequences, is (N, T) and selects which time steps count toward the loss.
    loss is "mse" or "cross_entropy" (integer labels, fused with softmax).
    """
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty training data")
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config.optimizer, config.learning_rate,
                         **config.optimizer_kwargs)
    history: list[float] = []
    best = np.inf
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            try:
                out = model.forward(xb)
            except NumericalError as exc:
                raise RuntimeError(f"training diverged at epoch {epoch}: {exc}")
            if loss == "mse":
                mb = mask[idx] if mask is not None else None
                value, grad = mse(out, yb, mask=mb)
            elif loss == "cross_entropy":
                value, grad, _ = softmax_cross_entropy(out, yb)
            else:
                raise ValueError(f"unknown loss '{loss}'")
            if not np.isfinite(value):
                raise RuntimeError(f"NaN loss at epoch {epoch}; "
                                   "inspect the first non-finite layer output")
            model.zero_grad()
            model.backward(grad)
            opt.step(model.parameters())
            total += value
            batches += 1
        epoch_loss = total / batches
        history.append(epoch_loss)
        if config.patience is not None:
            if epoch_loss < best - 1e-12:
                best = epoch_loss
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return history
