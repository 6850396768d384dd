"""AdamW with decoupled weight decay, plus the warmup/cosine LR schedule."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError
from .engine import Tensor


class AdamW:
    """Decoupled-weight-decay Adam over a named parameter dict.

    The update is deterministic given parameter values, gradients, and
    step count. ``step`` requires every parameter to carry a populated
    gradient.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = float(lr)
        self.betas = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        if lr is None:
            lr = self.lr
        self.t += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                raise ContractError(f"parameter {name!r} has no gradient")
            m = self._m[name]
            v = self._v[name]
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= lr * (update + self.weight_decay * p.data)


def warmup_cosine_lr(base_lr: float, epoch: int, total_epochs: int,
                     warmup_epochs: int) -> float:
    """Per-epoch learning rate: linear ramp, then cosine annealing to zero.

    Epoch 0 already takes a nonzero step (ramp evaluated at epoch+1) so a
    one-epoch smoke run actually trains.
    """
    if warmup_epochs >= total_epochs:
        raise ContractError("warmup_epochs must be < total_epochs")
    if epoch < warmup_epochs:
        return base_lr * (epoch + 1) / warmup_epochs
    span = max(1, total_epochs - warmup_epochs)
    progress = (epoch - warmup_epochs) / span
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
