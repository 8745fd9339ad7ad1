"""
Finite-difference verification of autodiff gradients.
"""

from typing import Callable, Sequence
import numpy as np

from hmaflow.etc.errors import ShapeMismatch
from .tensor import Tensor, no_grad


def _scalarise(out: Tensor, projection: np.ndarray | None) -> Tensor:
    if out.size == 1:
        return out.sum()
    return (out * Tensor(projection)).sum()


def gradient_check(fn: Callable[..., Tensor],
                   inputs: Sequence[Tensor],
                   eps: float = 1e-4,
                   seed: int = 0,
                   ) -> float:
    """
    Compare autodiff gradients against central finite differences.

    Non-scalar outputs are reduced with a fixed random projection so every output element
    contributes. Inputs are perturbed in place and restored, so module parameters can be
    checked by passing them in and closing over the module inside `fn`.
    :param fn: Function of the inputs returning a tensor.
    :param inputs: float64 tensors to differentiate with respect to.
    :param eps: Finite-difference step.
    :param seed: Seed of the output projection.
    :return: The largest relative error over all inputs, measured as
        max|autodiff - numeric| / max(max|autodiff|, max|numeric|, 1e-8).
    """
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise ShapeMismatch(f'gradient_check requires float64 inputs, got {tensor.dtype}')
        tensor.data = np.ascontiguousarray(tensor.data)
        tensor.requires_grad = True
        tensor.zero_grad()

    out = fn(*inputs)
    projection = None
    if out.size != 1:
        projection = np.random.default_rng(seed).standard_normal(out.shape)

    _scalarise(out, projection).backward()
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in inputs]

    worst = 0.0
    with no_grad():
        for tensor, expected in zip(inputs, analytic):
            numeric = np.zeros(tensor.shape)
            flat = tensor.data.reshape(-1)
            numeric_flat = numeric.reshape(-1)

            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                upper = _scalarise(fn(*inputs), projection).item()
                flat[i] = original - eps
                lower = _scalarise(fn(*inputs), projection).item()
                flat[i] = original
                numeric_flat[i] = (upper - lower) / (2 * eps)

            scale = max(np.abs(expected).max(), np.abs(numeric).max(), 1e-8)
            worst = max(worst, float(np.abs(expected - numeric).max() / scale))

    return worst
