"""
Differentiable bilinear sampling with pixel-centre coordinates and zero padding.

Coordinate (x, y) addresses element [..., y, x] exactly when both are integers. Corners that
fall outside [0, W-1] x [0, H-1] contribute zero.
"""

import numpy as np

from hmaflow.etc.errors import NonFiniteValues, ShapeMismatch
from .tensor import Function, Tensor

# (x offset, y offset) of the four interpolation corners, in accumulation order
_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


def _corner_terms(coords: np.ndarray, height: int, width: int):
    """
    Flat indices, validity masks and weights of the four corners for every sample.
    :param coords: Sample coordinates [B, 2, N].
    :param height: Grid height.
    :param width: Grid width.
    :return: A list of (flat index, effective weight, dweight/dx, dweight/dy) per corner,
        each array of shape [B, N], with weights already zeroed for out-of-range corners.
    """
    x = coords[:, 0]
    y = coords[:, 1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    ax = x - x0
    ay = y - y0

    terms = []
    for dx, dy in _CORNERS:
        xi = x0 + dx
        yi = y0 + dy
        valid = (xi >= 0) & (xi <= width - 1) & (yi >= 0) & (yi <= height - 1)

        wx = ax if dx else 1 - ax
        wy = ay if dy else 1 - ay
        sign_x = 1 if dx else -1
        sign_y = 1 if dy else -1

        index = (np.clip(yi, 0, height - 1) * width + np.clip(xi, 0, width - 1)).astype(np.int64)
        terms.append((
            index,
            np.where(valid, wx * wy, 0).astype(coords.dtype, copy=False),
            np.where(valid, sign_x * wy, 0).astype(coords.dtype, copy=False),
            np.where(valid, sign_y * wx, 0).astype(coords.dtype, copy=False),
        ))
    return terms


def _gather(flat: np.ndarray, index: np.ndarray) -> np.ndarray:
    """
    Gather [B, C, N] values from a [B, C, H*W] array with a per-batch [B, N] index.
    """
    return np.take_along_axis(flat, np.broadcast_to(index[:, None, :], flat.shape[:2] + index.shape[1:]), axis=2)


def _validate_coords(coords: np.ndarray):
    if not np.all(np.isfinite(coords)):
        bad = int(coords.size - np.count_nonzero(np.isfinite(coords)))
        raise NonFiniteValues(f'bilinear_sample received {bad} non-finite coordinate value(s)')


def bilinear_sample_array(grid: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """
    Non-differentiable bilinear sampling on raw arrays.
    :param grid: Values [B, C, H, W].
    :param coords: Sample positions [B, 2, N] as (x, y).
    :return: Sampled values [B, C, N].
    """
    _validate_coords(coords)
    batch, channels, height, width = grid.shape
    flat = grid.reshape(batch, channels, height * width)
    coords = coords.astype(grid.dtype, copy=False)

    out = np.zeros((batch, channels, coords.shape[2]), dtype=grid.dtype)
    for index, weight, _, _ in _corner_terms(coords, height, width):
        out += _gather(flat, index) * weight[:, None, :]
    return out


class BilinearSample(Function):
    def forward(self, grid: np.ndarray, coords: np.ndarray) -> np.ndarray:
        _validate_coords(coords)
        batch, channels, height, width = grid.shape
        flat = grid.reshape(batch, channels, height * width)
        coords = coords.astype(grid.dtype, copy=False)

        self.grid_shape = grid.shape
        self.terms = _corner_terms(coords, height, width)
        self.corner_values = [_gather(flat, index) for index, _, _, _ in self.terms]

        out = np.zeros((batch, channels, coords.shape[2]), dtype=grid.dtype)
        for values, (_, weight, _, _) in zip(self.corner_values, self.terms):
            out += values * weight[:, None, :]
        return out

    def backward(self, grad: np.ndarray):
        batch, channels, height, width = self.grid_shape
        samples = grad.shape[2]
        grid_tracked, coords_tracked = (t.requires_grad for t in self.inputs)

        grad_grid = None
        if grid_tracked:
            # Single bincount over all corners keeps accumulation order fixed
            row_offset = (np.arange(batch * channels, dtype=np.int64) * (height * width)).reshape(batch, channels, 1)
            keys = []
            weights = []
            for index, weight, _, _ in self.terms:
                keys.append((row_offset + index[:, None, :]).reshape(-1))
                weights.append((grad * weight[:, None, :]).reshape(-1))
            grad_grid = np.bincount(
                np.concatenate(keys),
                weights=np.concatenate(weights),
                minlength=batch * channels * height * width,
            ).astype(grad.dtype).reshape(self.grid_shape)

        grad_coords = None
        if coords_tracked:
            grad_x = np.zeros((batch, samples), dtype=grad.dtype)
            grad_y = np.zeros((batch, samples), dtype=grad.dtype)
            for values, (_, _, dweight_dx, dweight_dy) in zip(self.corner_values, self.terms):
                weighted = (grad * values).sum(axis=1)
                grad_x += weighted * dweight_dx
                grad_y += weighted * dweight_dy
            grad_coords = np.stack([grad_x, grad_y], axis=1)

        return grad_grid, grad_coords


def bilinear_sample(grid: Tensor, coords: Tensor) -> Tensor:
    """
    Sample a [B, C, H, W] grid at [B, 2, N] (x, y) positions.
    :param grid: The values to sample.
    :param coords: The sample positions in pixel units, pixel-centre convention.
    :return: The sampled values [B, C, N], differentiable w.r.t. grid and coords.
    """
    if grid.ndim != 4:
        raise ShapeMismatch(f'bilinear_sample expects a [B, C, H, W] grid, got shape {grid.shape}')
    if coords.ndim != 3 or coords.shape[1] != 2 or coords.shape[0] != grid.shape[0]:
        raise ShapeMismatch(
            f'bilinear_sample expects [{grid.shape[0]}, 2, N] coordinates, got shape {coords.shape}'
        )
    return BilinearSample.apply(grid, coords)
