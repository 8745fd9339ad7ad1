"""
Functional wrappers over the differentiable primitives, plus the composite operations
(normalisation, pooling, activation) built from them.
"""

import math
from typing import Sequence
import numpy as np

from hmaflow.etc.errors import ShapeMismatch
from .tensor import Tensor, Concat, Pad, Softmax, Take


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Concatenate tensors along an existing axis.
    :param tensors: The tensors to concatenate, in order.
    :param axis: The axis to concatenate along.
    :return: The concatenated tensor.
    """
    if not tensors:
        raise ShapeMismatch('concat() requires at least one tensor')
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def relu(x: Tensor) -> Tensor:
    return x.relu()


def tanh(x: Tensor) -> Tensor:
    return x.tanh()


def sigmoid(x: Tensor) -> Tensor:
    return x.sigmoid()


def gelu(x: Tensor) -> Tensor:
    """
    GELU activation, tanh approximation.
    """
    inner = (x + (x * x * x) * 0.044715) * math.sqrt(2.0 / math.pi)
    return x * 0.5 * (inner.tanh() + 1.0)


def mean(x: Tensor, axis: int | Sequence[int] | None = None, keepdims: bool = False) -> Tensor:
    return x.mean(axis=axis, keepdims=keepdims)


def take(x: Tensor, indices: np.ndarray | Sequence[int], axis: int) -> Tensor:
    """
    Gather slices along one axis. Repeated indices accumulate gradient.
    :param x: The input tensor.
    :param indices: One-dimensional integer indices.
    :param axis: The axis to gather along.
    :return: The gathered tensor.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1:
        raise ShapeMismatch(f'take() requires one-dimensional indices, got shape {indices.shape}')
    if indices.size and (indices.min() < 0 or indices.max() >= x.shape[axis]):
        raise ShapeMismatch(f'take() indices out of range for axis {axis} of extent {x.shape[axis]}')
    return Take.apply(x, indices=indices, axis=axis)


def pad(x: Tensor, widths: Sequence[tuple[int, int]], value: float = 0.0) -> Tensor:
    """
    Constant padding with one (before, after) pair per axis.
    """
    widths = tuple((int(before), int(after)) for before, after in widths)
    if any(before < 0 or after < 0 for before, after in widths):
        raise ShapeMismatch(f'Padding widths must be non-negative, got {widths}')
    return Pad.apply(x, widths=widths, value=value)


def pad_replicate(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """
    Replicate the border rows and columns of a [..., H, W] tensor.
    :param x: The input tensor, spatial dims last.
    :param top: Rows to add above.
    :param bottom: Rows to add below.
    :param left: Columns to add on the left.
    :param right: Columns to add on the right.
    :return: The padded tensor.
    """
    height, width = x.shape[-2:]
    if top or bottom:
        rows = np.clip(np.arange(-top, height + bottom), 0, height - 1)
        x = take(x, rows, axis=x.ndim - 2)
    if left or right:
        cols = np.clip(np.arange(-left, width + right), 0, width - 1)
        x = take(x, cols, axis=x.ndim - 1)
    return x


def layer_norm(x: Tensor,
               weight: Tensor = None,
               bias: Tensor = None,
               eps: float = 1e-5,
               ) -> Tensor:
    """
    Normalise over the last axis, then apply the optional affine transform.
    """
    centred = x - x.mean(axis=-1, keepdims=True)
    variance = (centred * centred).mean(axis=-1, keepdims=True)
    out = centred / (variance + eps).sqrt()
    if weight is not None:
        out = out * weight
    if bias is not None:
        out = out + bias
    return out


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalise each channel of each sample of a [B, C, H, W] tensor over its spatial extent.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f'instance_norm() expects a [B, C, H, W] tensor, got {x.shape}')
    centred = x - x.mean(axis=(2, 3), keepdims=True)
    variance = (centred * centred).mean(axis=(2, 3), keepdims=True)
    return centred / (variance + eps).sqrt()


def _pool_blocks(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeMismatch(f'2x2 pooling expects a [B, C, H, W] tensor, got {x.shape}')
    batch, channels, height, width = x.shape
    if height < 2 or width < 2:
        raise ShapeMismatch(f'2x2 pooling needs spatial extents of at least 2, got {height}x{width}')
    if height % 2 or width % 2:
        x = x[:, :, :height - height % 2, :width - width % 2]
    return x.reshape(batch, channels, height // 2, 2, width // 2, 2)


def avg_pool2d(x: Tensor) -> Tensor:
    """
    2x2 average pooling with stride 2. Odd trailing rows and columns are dropped.
    """
    return _pool_blocks(x).mean(axis=(3, 5))


def max_pool2d(x: Tensor) -> Tensor:
    """
    2x2 max pooling with stride 2. Odd trailing rows and columns are dropped.
    """
    return _pool_blocks(x).max(axis=(3, 5))
