"""
Weights container file format.

All integers are little-endian u32. Layout: magic b'HMAW', format version, entry count, then
per entry the UTF-8 name length, the name, the rank, one u32 per dimension and the float32
payload in row-major order.
"""

import os
import struct
from abc import ABC, abstractmethod
from typing import Final, Optional
import aiofiles
import numpy as np

from hmaflow.etc.consts import LOGGER, WEIGHTS_MAGIC, WEIGHTS_VERSION
from hmaflow.etc.errors import FilesNotFound, WeightsFormatError
from hmaflow.etc.utils import ensure_parent_directory
from hmaflow.model.config import ModelConfig
from hmaflow.network import HmaFlow


class WeightsContainerFile(ABC):
    """
    Abstract base class for weights container file formats.
    """
    _VERSION: Optional[int] = None
    _MAGIC: Optional[bytes] = None

    @staticmethod
    async def _read_exact(f, n: int, what: str) -> bytes:
        """
        aiofiles.read(n) may return fewer than n bytes; this reads exactly n or raises.
        :param f: The file object to read from
        :param n: The exact number of bytes to read
        :param what: Description of the field, for the error message
        :return: A bytes object containing exactly n bytes
        """
        buf = bytearray()
        while len(buf) < n:
            chunk = await f.read(n - len(buf))
            if not chunk:
                raise WeightsFormatError(f'Unexpected end of file while reading {what}: expected {n} bytes')
            buf += chunk
        return bytes(buf)

    @abstractmethod
    async def read(self) -> dict[str, np.ndarray]:
        """
        Read every entry of the file, in file order.
        """

    @abstractmethod
    async def write(self, state: dict[str, np.ndarray]):
        """
        Write the entries of a state dict, in iteration order.
        """


class WeightsContainerFileV1(WeightsContainerFile):
    """
    Weights container file format version 1.
    """
    _VERSION: Final[int] = WEIGHTS_VERSION
    _MAGIC: Final[bytes] = WEIGHTS_MAGIC
    _HDR_STRUCT: Final[struct.Struct] = struct.Struct('<4sII')
    _U32: Final[struct.Struct] = struct.Struct('<I')

    def __init__(self, path: str | os.PathLike):
        self.path = path

    async def _read_u32(self, f, what: str) -> int:
        return self._U32.unpack(await self._read_exact(f, self._U32.size, what))[0]

    async def read(self) -> dict[str, np.ndarray]:
        if not os.path.isfile(self.path):
            raise FilesNotFound(f'Weights file not found: {self.path}')

        state: dict[str, np.ndarray] = {}
        async with aiofiles.open(self.path, mode='rb') as f:
            hdr = await self._read_exact(f, self._HDR_STRUCT.size, 'header')
            magic, version, count = self._HDR_STRUCT.unpack(hdr)

            if magic != self._MAGIC:
                raise WeightsFormatError(f'Invalid weights file (bad magic {magic!r})')
            if version != self._VERSION:
                raise WeightsFormatError(f'Unsupported weights format version: {version}')

            for index in range(count):
                name_len = await self._read_u32(f, f'name length of entry {index}')
                try:
                    name = (await self._read_exact(f, name_len, f'name of entry {index}')).decode('utf-8')
                except UnicodeDecodeError as e:
                    raise WeightsFormatError(f'Entry {index} has a name that is not valid UTF-8') from e
                if name in state:
                    raise WeightsFormatError(f'Duplicate weights entry name: {name}')

                rank = await self._read_u32(f, f'rank of {name}')
                dims = tuple([await self._read_u32(f, f'dimensions of {name}') for _ in range(rank)])
                payload_size = int(np.prod(dims, dtype=np.int64)) * 4
                payload = await self._read_exact(f, payload_size, f'payload of {name}')

                state[name] = np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(dims)

            if await f.read(1):
                raise WeightsFormatError('Trailing bytes after the last weights entry')

        return state

    async def write(self, state: dict[str, np.ndarray]):
        ensure_parent_directory(self.path)
        async with aiofiles.open(self.path, mode='wb') as f:
            await f.write(self._HDR_STRUCT.pack(self._MAGIC, self._VERSION, len(state)))

            for name, value in state.items():
                name_bytes = name.encode('utf-8')
                array = np.ascontiguousarray(value, dtype='<f4')

                entry = bytearray()
                entry += self._U32.pack(len(name_bytes))
                entry += name_bytes
                entry += self._U32.pack(array.ndim)
                for dim in array.shape:
                    entry += self._U32.pack(dim)
                entry += array.tobytes(order='C')
                await f.write(bytes(entry))


async def save_weights(model: HmaFlow, path: str | os.PathLike):
    """
    Write a model's parameters.
    """
    state = model.state_dict()
    await WeightsContainerFileV1(path).write(state)
    LOGGER.info('Saved %d weight tensors to %s', len(state), path)


async def load_weights(path: str | os.PathLike, config: Optional[ModelConfig] = None) -> HmaFlow:
    """
    Build a model for `config` and load its parameters from a weights file.
    :param path: The weights file.
    :param config: The architecture the weights belong to.
    :return: The loaded model, in evaluation mode.
    """
    state = await WeightsContainerFileV1(path).read()
    model = HmaFlow(config)
    model.load_state_dict(state)
    LOGGER.info('Loaded %d weight tensors from %s', len(state), path)
    return model.eval()
