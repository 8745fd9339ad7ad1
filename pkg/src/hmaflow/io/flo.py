"""
Middlebury .flo reader and writer.

Layout, little-endian: float32 magic 202021.25 ("PIEH"), int32 width, int32 height, then
width * height interleaved (u, v) float32 pairs in row-major order.
"""

import os
import struct
from typing import Final
import numpy as np

from hmaflow.etc.consts import FLO_MAGIC
from hmaflow.etc.enums import Resolution
from hmaflow.etc.errors import FilesNotFound, InvalidFloFile
from hmaflow.etc.utils import ensure_parent_directory
from hmaflow.model.flow import FlowField

_HDR_STRUCT: Final[struct.Struct] = struct.Struct('<fii')


def read_flo(path: str | os.PathLike) -> FlowField:
    """
    Read a .flo file into a full-resolution field of batch size one.
    :param path: The file to read.
    :return: The flow field.
    """
    if not os.path.isfile(path):
        raise FilesNotFound(f'Flow file not found: {path}')

    with open(path, 'rb') as f:
        raw = f.read()

    if len(raw) < _HDR_STRUCT.size:
        raise InvalidFloFile(f'not a .flo file: {path} is shorter than the {_HDR_STRUCT.size}-byte header')

    magic, width, height = _HDR_STRUCT.unpack_from(raw, 0)
    if magic != np.float32(FLO_MAGIC):
        raise InvalidFloFile(f'not a .flo file: bad magic {magic!r} in {path}')
    if width <= 0 or height <= 0:
        raise InvalidFloFile(f'Invalid .flo dimensions {width}x{height} in {path}')

    expected = width * height * 2 * 4
    payload = raw[_HDR_STRUCT.size:]
    if len(payload) < expected:
        raise InvalidFloFile(
            f'Truncated .flo payload in {path}: expected {expected} bytes, got {len(payload)}'
        )

    data = np.frombuffer(payload, dtype='<f4', count=width * height * 2).reshape(height, width, 2)
    return FlowField.from_array(data.astype(np.float32), Resolution.FULL)


def write_flo(path: str | os.PathLike, flow: FlowField | np.ndarray, index: int = 0):
    """
    Write one flow field as a .flo file.
    :param path: The destination file.
    :param flow: A FlowField (batch item `index` is written) or an [h, w, 2] array.
    :param index: Batch item to write.
    """
    if isinstance(flow, FlowField):
        array = flow.to_hw2(index)
    else:
        array = np.asarray(flow)
        if array.ndim != 3 or array.shape[2] != 2:
            raise InvalidFloFile(f'Expected an [h, w, 2] flow array, got shape {array.shape}')

    height, width = array.shape[:2]
    ensure_parent_directory(path)
    with open(path, 'wb') as f:
        f.write(_HDR_STRUCT.pack(FLO_MAGIC, width, height))
        f.write(np.ascontiguousarray(array, dtype='<f4').tobytes(order='C'))
