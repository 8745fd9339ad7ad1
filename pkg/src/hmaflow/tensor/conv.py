"""
Two-dimensional cross-correlation with stride, zero padding and channel groups.
"""

from typing import Optional
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hmaflow.etc.errors import ShapeMismatch
from .tensor import Function, Tensor


class ConvSpec(BaseModel):
    """
    Geometry of a convolution: kernel shape, stride, padding and groups.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    kernel: tuple[int, int, int, int] = Field(
        ...,
        description='Kernel shape as (out_channels, in_channels_per_group, kernel_height, kernel_width)',
    )
    stride: tuple[int, int] = Field(
        (1, 1),
        description='Vertical and horizontal stride',
    )
    padding: tuple[int, int] = Field(
        (0, 0),
        description='Vertical and horizontal zero padding',
    )
    groups: int = Field(
        1,
        ge=1,
        description='Number of channel groups',
    )

    @model_validator(mode='after')
    def _validate_geometry(self) -> 'ConvSpec':
        if any(extent <= 0 for extent in self.kernel):
            raise ValueError(f'Kernel extents must be positive, got {self.kernel}')
        if any(s <= 0 for s in self.stride):
            raise ValueError(f'Strides must be positive, got {self.stride}')
        if any(p < 0 for p in self.padding):
            raise ValueError(f'Padding must be non-negative, got {self.padding}')
        if self.kernel[0] % self.groups:
            raise ValueError(f'Output channels {self.kernel[0]} are not divisible by groups {self.groups}')
        return self

    @classmethod
    def build(cls,
              in_channels: int,
              out_channels: int,
              kernel_size: int | tuple[int, int],
              stride: int | tuple[int, int] = 1,
              padding: int | tuple[int, int] = 0,
              groups: int = 1,
              ) -> 'ConvSpec':
        """
        Build a spec from layer-style arguments.
        """
        if in_channels % groups:
            raise ShapeMismatch(f'Input channels {in_channels} are not divisible by groups {groups}')
        kh, kw = (kernel_size, kernel_size) if isinstance(kernel_size, int) else kernel_size
        return cls(
            kernel=(out_channels, in_channels // groups, kh, kw),
            stride=(stride, stride) if isinstance(stride, int) else tuple(stride),
            padding=(padding, padding) if isinstance(padding, int) else tuple(padding),
            groups=groups,
        )

    @property
    def in_channels(self) -> int:
        return self.kernel[1] * self.groups

    @property
    def out_channels(self) -> int:
        return self.kernel[0]

    @property
    def is_depthwise(self) -> bool:
        return self.groups == self.in_channels and self.kernel[1] == 1

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        """
        Spatial output extent, floor((in + 2p - k) / s) + 1 per axis.
        """
        out_h = (height + 2 * self.padding[0] - self.kernel[2]) // self.stride[0] + 1
        out_w = (width + 2 * self.padding[1] - self.kernel[3]) // self.stride[1] + 1
        return out_h, out_w


def _windows(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """
    Strided patch view of the padded input, shape [B, C, H', W', kh, kw].
    """
    py, px = spec.padding
    if py or px:
        x = np.pad(x, ((0, 0), (0, 0), (py, py), (px, px)))
    windows = sliding_window_view(x, spec.kernel[2:], axis=(2, 3))
    return windows[:, :, ::spec.stride[0], ::spec.stride[1]]


class Conv2d(Function):
    def forward(self,
                x: np.ndarray,
                weight: np.ndarray,
                *bias: np.ndarray,
                spec: ConvSpec,
                ) -> np.ndarray:
        batch = x.shape[0]
        groups = spec.groups
        out_channels, per_group = spec.kernel[:2]

        windows = _windows(x, spec)
        out_h, out_w = windows.shape[2:4]
        self.spec = spec
        self.input_shape = x.shape
        self.windows = windows
        self.weight = weight
        self.has_bias = bool(bias)

        if groups == 1:
            out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
            out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        else:
            grouped = windows.reshape(batch, groups, per_group, out_h, out_w, *spec.kernel[2:])
            grouped_weight = weight.reshape(groups, out_channels // groups, per_group, *spec.kernel[2:])
            out = np.einsum('bgcyxij,gkcij->bgkyx', grouped, grouped_weight, optimize=True)
            out = out.reshape(batch, out_channels, out_h, out_w)

        if bias:
            out = out + bias[0].reshape(1, -1, 1, 1)
        return out.astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray):
        spec = self.spec
        batch, channels, height, width = self.input_shape
        groups = spec.groups
        out_channels, per_group, kh, kw = spec.kernel
        out_h, out_w = grad.shape[2:]

        if groups == 1:
            grad_weight = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
            grad_windows = np.tensordot(grad, self.weight, axes=([1], [0]))
            grad_windows = grad_windows.transpose(0, 3, 1, 2, 4, 5)
        else:
            grouped_grad = grad.reshape(batch, groups, out_channels // groups, out_h, out_w)
            grouped = self.windows.reshape(batch, groups, per_group, out_h, out_w, kh, kw)
            grouped_weight = self.weight.reshape(groups, out_channels // groups, per_group, kh, kw)
            grad_weight = np.einsum('bgkyx,bgcyxij->gkcij', grouped_grad, grouped, optimize=True)
            grad_weight = grad_weight.reshape(self.weight.shape)
            grad_windows = np.einsum('bgkyx,gkcij->bgcyxij', grouped_grad, grouped_weight, optimize=True)
            grad_windows = grad_windows.reshape(batch, channels, out_h, out_w, kh, kw)

        py, px = spec.padding
        sy, sx = spec.stride
        grad_padded = np.zeros((batch, channels, height + 2 * py, width + 2 * px), dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + sy * out_h:sy, j:j + sx * out_w:sx] += grad_windows[..., i, j]
        grad_input = grad_padded[:, :, py:py + height, px:px + width]

        grads = (grad_input, grad_weight)
        if self.has_bias:
            grads += (grad.sum(axis=(0, 2, 3)),)
        return grads


def conv2d(x: Tensor,
           spec: ConvSpec,
           weight: Tensor,
           bias: Optional[Tensor] = None,
           ) -> Tensor:
    """
    Cross-correlate a [B, C, H, W] input with a [K, C/groups, kh, kw] kernel.
    :param x: The input tensor.
    :param spec: The convolution geometry.
    :param weight: The kernel tensor, shape `spec.kernel`.
    :param bias: Optional per-output-channel bias of shape [K].
    :return: The output tensor [B, K, H', W'].
    """
    if x.ndim != 4:
        raise ShapeMismatch(f'conv2d expects a [B, C, H, W] input, got shape {x.shape}')
    if tuple(weight.shape) != spec.kernel:
        raise ShapeMismatch(f'conv2d weight shape {weight.shape} does not match kernel {spec.kernel}')
    if x.shape[1] != spec.in_channels:
        raise ShapeMismatch(
            f'conv2d input has {x.shape[1]} channels, kernel expects '
            f'{spec.kernel[1]} per group x {spec.groups} groups = {spec.in_channels}'
        )
    if bias is not None and tuple(bias.shape) != (spec.out_channels,):
        raise ShapeMismatch(f'conv2d bias shape {bias.shape} does not match {spec.out_channels} output channels')

    out_h, out_w = spec.output_size(*x.shape[2:])
    if out_h <= 0 or out_w <= 0:
        raise ShapeMismatch(
            f'conv2d input {x.shape[2]}x{x.shape[3]} is smaller than kernel '
            f'{spec.kernel[2]}x{spec.kernel[3]} after padding'
        )

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*inputs, spec=spec)
