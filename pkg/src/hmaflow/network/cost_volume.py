"""
All-pairs cost volumes and the window searches that turn them into motion volumes.

A base volume stores, for every source pixel of frame 1, its 2D response map over frame 2,
laid out as [B * H * W, 1, H, W] so one bilinear sampling call serves every source pixel.
"""

import math
from dataclasses import dataclass
from typing import Sequence
import numpy as np

from hmaflow.etc.enums import Level, Resolution
from hmaflow.etc.errors import InvalidConfiguration, ResolutionMismatch, ShapeMismatch
from hmaflow.model.flow import FlowField
from hmaflow.tensor import Tensor, avg_pool2d, bilinear_sample, concat


@dataclass
class BaseCostVolume:
    """
    Scaled all-pairs correlation at one pyramid level.
    """
    level: Level
    data: Tensor
    scale: float
    batch: int
    height: int
    width: int

    def as_array(self) -> np.ndarray:
        """
        The volume as a [B, H, W, H, W] array indexed [b, i, j, m, n].
        """
        return self.data.numpy().reshape(self.batch, self.height, self.width, self.height, self.width)


@dataclass
class MotionVolume:
    """
    Concatenated window lookups, data [B, d, H, W] with one contiguous block per radius.
    """
    level: Level
    data: Tensor
    radii: tuple[int, ...]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


def coords_grid(batch: int, height: int, width: int) -> np.ndarray:
    """
    Pixel coordinates [B, 2, H, W], channel 0 is x (column) and channel 1 is y (row).
    """
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float32), np.arange(width, dtype=np.float32), indexing='ij')
    return np.broadcast_to(np.stack([xs, ys])[None], (batch, 2, height, width)).copy()


def window_offsets(radii: Sequence[int]) -> np.ndarray:
    """
    Integer (dx, dy) offsets of the concatenated Chebyshev windows, shape [n, 2].
    Each block enumerates dy in the outer loop and dx in the inner loop, both ascending.
    """
    if not radii:
        raise InvalidConfiguration('At least one search radius is required')

    blocks = []
    for radius in radii:
        if radius <= 0:
            raise InvalidConfiguration(f'Search radius must be positive, got {radius}')
        steps = np.arange(-radius, radius + 1, dtype=np.float32)
        dy, dx = np.meshgrid(steps, steps, indexing='ij')
        blocks.append(np.stack([dx.reshape(-1), dy.reshape(-1)], axis=1))
    return np.concatenate(blocks, axis=0)


def motion_channels(radii: Sequence[int]) -> int:
    return sum((2 * r + 1) ** 2 for r in radii)


def build_base_volume(f1: Tensor, f2: Tensor, level: Level = Level.EIGHTH) -> BaseCostVolume:
    """
    All-pairs inner products of two [B, D, H, W] feature maps, scaled by 1/sqrt(D).
    :param f1: Frame 1 features.
    :param f2: Frame 2 features.
    :param level: The pyramid level the features belong to.
    :return: The base cost volume.
    """
    if f1.ndim != 4 or f1.shape != f2.shape:
        raise ShapeMismatch(f'Feature maps must share a [B, D, H, W] shape, got {f1.shape} and {f2.shape}')

    batch, dim, height, width = f1.shape
    scale = 1.0 / math.sqrt(dim)
    source = f1.reshape(batch, dim, height * width).transpose(1, 2)
    target = f2.reshape(batch, dim, height * width)
    corr = (source @ target) * scale

    return BaseCostVolume(
        level=level,
        data=corr.reshape(batch * height * width, 1, height, width),
        scale=scale,
        batch=batch,
        height=height,
        width=width,
    )


def upsample_nearest2(x: Tensor) -> Tensor:
    """
    Nearest-neighbour 2x upsampling of a [B, C, H, W] tensor.
    """
    batch, channels, height, width = x.shape
    ones = Tensor(np.ones((1, 1, 1, 2, 1, 2), dtype=x.dtype))
    return (x.reshape(batch, channels, height, 1, width, 1) * ones).reshape(batch, channels, 2 * height, 2 * width)


def lookup_centroids(flow: FlowField, level: Level) -> Tensor:
    """
    Lookup centroids p' = p + f for every source pixel of a level.

    The flow lives at eighth resolution. At the quarter level each source pixel uses the
    flow of its eighth-resolution parent cell, doubled.
    :param flow: The current eighth-resolution flow estimate.
    :param level: The level whose volume is searched.
    :return: Centroids [B, 2, lH, lW] in the level's pixel units.
    """
    if flow.resolution is not Resolution.EIGHTH:
        raise ResolutionMismatch(f'Lookup flow must be at eighth resolution, got {flow.resolution.value}')

    displacement = flow.data
    if level is Level.QUARTER:
        displacement = upsample_nearest2(displacement) * 2.0

    batch, _, height, width = displacement.shape
    return displacement + Tensor(coords_grid(batch, height, width).astype(displacement.dtype))


def _check_flow(vol: BaseCostVolume, flow: FlowField):
    factor = 2 if vol.level is Level.QUARTER else 1
    expected = (vol.batch, 2, vol.height // factor, vol.width // factor)
    if flow.data.shape != expected or vol.height % factor or vol.width % factor:
        raise ShapeMismatch(
            f'Flow of shape {flow.data.shape} does not match a {vol.level.value} volume '
            f'of {vol.height}x{vol.width}; expected {expected}'
        )


def _sample_windows(data: Tensor, centroids: Tensor, offsets: np.ndarray, scale: float = 1.0) -> Tensor:
    """
    Sample every source pixel's response map around its centroid.
    :param data: Volume data [B * H * W, 1, h, w].
    :param centroids: Centroids [B, 2, H, W].
    :param offsets: Window offsets [n, 2].
    :param scale: Factor applied to the centroids before offsetting.
    :return: Samples [B, n, H, W].
    """
    batch, _, height, width = centroids.shape
    points = centroids.permute(0, 2, 3, 1).reshape(batch * height * width, 2, 1)
    if scale != 1.0:
        points = points * scale

    grid_offsets = Tensor(offsets.T[None].astype(data.dtype))
    samples = bilinear_sample(data, points + grid_offsets)
    return samples.reshape(batch, height, width, offsets.shape[0]).permute(0, 3, 1, 2)


def multi_scale_search(vol: BaseCostVolume, flow: FlowField, radii: Sequence[int]) -> MotionVolume:
    """
    Sample (2r+1)^2 integer-offset windows for every radius around each lookup centroid and
    concatenate the blocks along the channel axis.
    :param vol: The base cost volume.
    :param flow: The current eighth-resolution flow.
    :param radii: The search radii, in block order.
    :return: A motion volume with sum((2r+1)^2) channels.
    """
    offsets = window_offsets(radii)
    _check_flow(vol, flow)

    centroids = lookup_centroids(flow, vol.level)
    return MotionVolume(
        level=vol.level,
        data=_sample_windows(vol.data, centroids, offsets),
        radii=tuple(radii),
    )


def search_window(vol: BaseCostVolume,
                  source: tuple[int, int],
                  centre: tuple[float, float],
                  radius: int,
                  batch: int = 0,
                  ) -> Tensor:
    """
    Single-pixel search: the (2r+1)^2 window of one source pixel's response map.
    :param vol: The base cost volume.
    :param source: Source pixel as (row, column).
    :param centre: Window centre p' as (x, y).
    :param radius: The window radius.
    :param batch: Batch item.
    :return: The window values, dy outer and dx inner, ascending.
    """
    offsets = window_offsets([radius])
    row, col = source
    if not (0 <= row < vol.height and 0 <= col < vol.width and 0 <= batch < vol.batch):
        raise ShapeMismatch(f'Source pixel {source} of batch item {batch} is outside the volume')

    index = (batch * vol.height + row) * vol.width + col
    grid = vol.data[index:index + 1]
    points = Tensor((offsets + np.asarray(centre, dtype=np.float32)).T[None].astype(vol.data.dtype))
    return bilinear_sample(grid, points).reshape(offsets.shape[0])


def build_pooled_pyramid(vol: BaseCostVolume, levels: int) -> list[BaseCostVolume]:
    """
    Repeated 2x2 average pooling of the target dimensions of a base volume.
    :param vol: The full-resolution base volume.
    :param levels: Number of scales, the first being the volume itself.
    :return: The pyramid, finest first.
    """
    if levels < 1:
        raise InvalidConfiguration(f'A pyramid needs at least one level, got {levels}')

    pyramid = [vol]
    data = vol.data
    for level in range(1, levels):
        if data.shape[2] < 2 or data.shape[3] < 2:
            raise InvalidConfiguration(
                f'A {vol.height}x{vol.width} volume is too small for a {levels}-level pyramid '
                f'(level {level} would be empty)'
            )
        data = avg_pool2d(data)
        pyramid.append(BaseCostVolume(vol.level, data, vol.scale, vol.batch, vol.height, vol.width))
    return pyramid


def pyramid_search(pyramid: Sequence[BaseCostVolume], flow: FlowField, radius: int) -> MotionVolume:
    """
    Radius-r window lookup on every pyramid scale, centroids divided by 2^k at scale k.
    :param pyramid: Output of `build_pooled_pyramid`.
    :param flow: The current eighth-resolution flow.
    :param radius: The window radius used on every scale.
    :return: A motion volume with levels * (2r+1)^2 channels.
    """
    if not pyramid:
        raise InvalidConfiguration('pyramid_search requires at least one pyramid level')
    offsets = window_offsets([radius])
    _check_flow(pyramid[0], flow)

    centroids = lookup_centroids(flow, pyramid[0].level)
    blocks = [
        _sample_windows(vol.data, centroids, offsets, scale=1.0 / 2 ** k)
        for k, vol in enumerate(pyramid)
    ]
    return MotionVolume(
        level=pyramid[0].level,
        data=concat(blocks, axis=1),
        radii=(radius,) * len(pyramid),
    )
