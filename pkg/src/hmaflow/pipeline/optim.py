"""
AdamW optimiser, global gradient-norm clipping and the warmup-cosine learning rate schedule.
"""

import math
from typing import Sequence
import numpy as np

from hmaflow.nn import Parameter


class AdamW:
    """
    Adam with decoupled weight decay.
    """

    def __init__(self,
                 params: Sequence[Parameter],
                 lr: float,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8,
                 weight_decay: float = 0.0,
                 ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()

    def step(self, lr: float = None):
        """
        Apply one update to every parameter holding a gradient.
        :param lr: Learning rate of this step; defaults to the constructor value.
        """
        lr = self.lr if lr is None else lr
        beta1, beta2 = self.betas
        self.step_count += 1
        bias1 = 1 - beta1 ** self.step_count
        bias2 = 1 - beta2 ** self.step_count

        for param, m, v in zip(self.params, self._m, self._v):
            if param.grad is None:
                continue
            grad = param.grad

            if self.weight_decay:
                param.data *= 1 - lr * self.weight_decay
            m *= beta1
            m += (1 - beta1) * grad
            v *= beta2
            v += (1 - beta2) * grad * grad

            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            param.data -= (lr * update).astype(param.dtype, copy=False)


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """
    Scale gradients in place so their global L2 norm is at most `max_norm`.
    :return: The norm before clipping.
    """
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0

    total = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))
    if total > max_norm:
        factor = max_norm / (total + 1e-6)
        for g in grads:
            g *= factor
    return total


class WarmupCosineSchedule:
    """
    Linear warmup to the peak learning rate, then cosine decay towards zero.
    """

    def __init__(self, peak_lr: float, total_steps: int, warmup_fraction: float = 0.05):
        self.peak_lr = peak_lr
        self.total_steps = max(1, total_steps)
        self.warmup_steps = int(round(self.total_steps * warmup_fraction))

    def __call__(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.peak_lr * (step + 1) / self.warmup_steps

        decay_steps = max(1, self.total_steps - self.warmup_steps)
        progress = min(1.0, (step - self.warmup_steps) / decay_steps)
        return self.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
