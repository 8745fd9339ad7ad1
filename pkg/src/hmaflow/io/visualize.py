"""
Optical flow colour coding on the Middlebury colour wheel.

Hue follows the flow direction and saturation the magnitude relative to the field's own
maximum (or a supplied cap). Zero flow is white; +u at full magnitude is the wheel's first
colour, pure red.
"""

from typing import Optional
import numpy as np

from hmaflow.etc.errors import NonFiniteValues, ShapeMismatch
from hmaflow.model.flow import FlowField

# Hue segment lengths: red-yellow, yellow-green, green-cyan, cyan-blue, blue-magenta, magenta-red
_SEGMENTS = (15, 6, 4, 11, 13, 6)


def make_colorwheel() -> np.ndarray:
    """
    The 55-entry RGB colour wheel, values in [0, 255].
    """
    wheel = np.zeros((sum(_SEGMENTS), 3))
    ry, yg, gc, cb, bm, mr = _SEGMENTS
    col = 0

    wheel[0:ry, 0] = 255
    wheel[0:ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry

    wheel[col:col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col:col + yg, 1] = 255
    col += yg

    wheel[col:col + gc, 1] = 255
    wheel[col:col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc

    wheel[col:col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col:col + cb, 2] = 255
    col += cb

    wheel[col:col + bm, 2] = 255
    wheel[col:col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm

    wheel[col:col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col:col + mr, 0] = 255
    return wheel


def flow_uv_to_colors(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Colour normalised flow components (magnitude at most 1 inside the wheel).
    :return: An [h, w, 3] uint8 image.
    """
    wheel = make_colorwheel()
    ncols = wheel.shape[0]

    rad = np.sqrt(np.square(u) + np.square(v))
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(np.int32)
    k1 = k0 + 1
    k1[k1 == ncols] = 0
    f = fk - k0

    image = np.zeros(u.shape + (3,), dtype=np.uint8)
    inside = rad <= 1
    for channel in range(3):
        col0 = wheel[k0, channel] / 255.0
        col1 = wheel[k1, channel] / 255.0
        col = (1 - f) * col0 + f * col1
        col[inside] = 1 - rad[inside] * (1 - col[inside])
        col[~inside] = col[~inside] * 0.75
        image[..., channel] = np.floor(255 * col)
    return image


def flow_to_image(flow: FlowField | np.ndarray, max_flow: Optional[float] = None, index: int = 0) -> np.ndarray:
    """
    Visualise a flow field.
    :param flow: A FlowField (batch item `index`) or an [h, w, 2] array.
    :param max_flow: Optional magnitude mapped to full saturation; defaults to the field's maximum.
    :param index: Batch item to render.
    :return: An [h, w, 3] uint8 RGB image.
    """
    array = flow.to_hw2(index) if isinstance(flow, FlowField) else np.asarray(flow)
    if array.ndim != 3 or array.shape[2] != 2 or array.size == 0:
        raise ShapeMismatch(f'Expected a non-empty [h, w, 2] flow, got shape {array.shape}')
    if not np.all(np.isfinite(array)):
        raise NonFiniteValues('Cannot visualise a flow field with non-finite values')

    u = array[..., 0].astype(np.float64)
    v = array[..., 1].astype(np.float64)
    norm = max_flow if max_flow is not None else float(np.sqrt(u * u + v * v).max())
    if norm <= 0:
        norm = 1.0

    return flow_uv_to_colors(u / norm, v / norm)


def visualize_flow(flow: FlowField | np.ndarray, max_flow: Optional[float] = None) -> np.ndarray:
    return flow_to_image(flow, max_flow)
