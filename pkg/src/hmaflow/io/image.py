"""
Image loading, saving and padding to a multiple of 8.
"""

import os
import numpy as np
from PIL import Image, UnidentifiedImageError

from hmaflow.etc.errors import FilesNotFound, InvalidConfiguration, ShapeMismatch
from hmaflow.etc.utils import ensure_parent_directory
from hmaflow.tensor import Tensor, pad_replicate

SUPPORTED_FORMATS = ('PNG', 'PPM')


def load_image(path: str | os.PathLike) -> Tensor:
    """
    Load a PNG or PPM image as a float32 [3, H, W] tensor scaled to [-1, 1].
    """
    if not os.path.isfile(path):
        raise FilesNotFound(f'Image not found: {path}')

    try:
        with Image.open(path) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise InvalidConfiguration(
                    f'Unsupported image format {img.format} for {path}; expected one of {", ".join(SUPPORTED_FORMATS)}'
                )
            rgb = np.asarray(img.convert('RGB'), dtype=np.float32)
    except UnidentifiedImageError as e:
        raise InvalidConfiguration(f'Cannot decode image {path}') from e

    return Tensor(np.ascontiguousarray((rgb / 255.0 * 2.0 - 1.0).transpose(2, 0, 1)))


def to_uint8(image: Tensor | np.ndarray) -> np.ndarray:
    """
    Convert a [3, H, W] image in [-1, 1] to an [H, W, 3] uint8 array.
    """
    array = image.numpy() if isinstance(image, Tensor) else np.asarray(image)
    return np.clip(np.rint((array.transpose(1, 2, 0) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def save_image(path: str | os.PathLike, rgb: np.ndarray):
    """
    Save an [H, W, 3] uint8 array; the format follows the file extension.
    """
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ShapeMismatch(f'Expected an [H, W, 3] uint8 image, got {rgb.shape} {rgb.dtype}')
    ensure_parent_directory(path)
    Image.fromarray(rgb).save(path)


class InputPadder:
    """
    Replicate-pads [B, C, H, W] tensors to multiples of `factor` and crops results back.
    Padding is split evenly between both sides, the extra pixel going after.
    """

    def __init__(self, height: int, width: int, factor: int = 8):
        self.height = height
        self.width = width
        pad_h = (-height) % factor
        pad_w = (-width) % factor
        self.top = pad_h // 2
        self.bottom = pad_h - self.top
        self.left = pad_w // 2
        self.right = pad_w - self.left

    @property
    def padded_size(self) -> tuple[int, int]:
        return self.height + self.top + self.bottom, self.width + self.left + self.right

    def pad(self, x: Tensor) -> Tensor:
        if tuple(x.shape[-2:]) != (self.height, self.width):
            raise ShapeMismatch(f'Expected spatial size {self.height}x{self.width}, got {x.shape[-2:]}')
        return pad_replicate(x, self.top, self.bottom, self.left, self.right)

    def unpad(self, x: Tensor) -> Tensor:
        padded_h, padded_w = self.padded_size
        if tuple(x.shape[-2:]) != (padded_h, padded_w):
            raise ShapeMismatch(f'Expected spatial size {padded_h}x{padded_w}, got {x.shape[-2:]}')
        return x[..., self.top:self.top + self.height, self.left:self.left + self.width]
