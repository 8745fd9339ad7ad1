"""
Synthetic image pairs with exact ground-truth flow.

Frame 1 is a seeded multi-scale random texture. A parametric motion about the integer image
centre maps each frame-1 pixel p to p'; the flow is p' - p, and frame 2 is built by sampling
frame 1 at the exact inverse map of every frame-2 pixel (bilinear, zero outside the frame).
"""

import math
from typing import Optional
from pydantic import BaseModel, ConfigDict, Field
import numpy as np

from hmaflow.etc.enums import MotionKind, Resolution
from hmaflow.etc.errors import ShapeMismatch
from hmaflow.etc.utils import get_rng
from hmaflow.model.flow import FlowField, SyntheticPair
from hmaflow.tensor import Tensor, bilinear_sample_array

TEXTURE_SCALES = (1, 2, 4, 8)
DOT_DENSITY = 0.02


class Motion(BaseModel):
    """
    A parametric motion: translation by (dx, dy), rotation by `angle` degrees or zoom by
    `scale`, the latter two about the image centre.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    kind: MotionKind = Field(
        ...,
        description='The motion model.',
    )
    dx: float = Field(
        0.0,
        description='Horizontal translation in pixels.',
    )
    dy: float = Field(
        0.0,
        description='Vertical translation in pixels.',
    )
    angle: float = Field(
        0.0,
        description='Rotation angle in degrees, counter-clockwise in image coordinates.',
    )
    scale: float = Field(
        1.0,
        gt=0,
        description='Zoom factor.',
    )

    @classmethod
    def translate(cls, dx: float, dy: float) -> 'Motion':
        return cls(kind=MotionKind.TRANSLATE, dx=dx, dy=dy)

    @classmethod
    def rotate(cls, angle: float) -> 'Motion':
        return cls(kind=MotionKind.ROTATE, angle=angle)

    @classmethod
    def zoom(cls, scale: float) -> 'Motion':
        return cls(kind=MotionKind.ZOOM, scale=scale)

    def linear_part(self) -> np.ndarray:
        if self.kind is MotionKind.ROTATE:
            theta = math.radians(self.angle)
            return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        if self.kind is MotionKind.ZOOM:
            return np.eye(2) * self.scale
        return np.eye(2)

    def translation(self) -> np.ndarray:
        if self.kind is MotionKind.TRANSLATE:
            return np.array([self.dx, self.dy])
        return np.zeros(2)


def random_texture(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """
    Sum of bilinearly upsampled noise octaves plus sparse bright dots, scaled to [-1, 1].
    :return: A float32 [3, H, W] array.
    """
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing='ij')
    texture = np.zeros((3, height, width))

    for scale in TEXTURE_SCALES:
        noise = rng.uniform(-1.0, 1.0, size=(1, 3, height // scale + 2, width // scale + 2))
        coords = np.stack([xs.reshape(-1) / scale, ys.reshape(-1) / scale])[None]
        texture += bilinear_sample_array(noise, coords).reshape(3, height, width) * scale ** 0.5

    dots = rng.random((height, width)) < DOT_DENSITY
    texture[:, dots] += 2.0 * rng.uniform(0.5, 1.0, size=(3, int(dots.sum())))

    peak = np.abs(texture).max()
    return (texture / peak).astype(np.float32) if peak > 0 else texture.astype(np.float32)


def motion_flow(height: int, width: int, motion: Motion) -> np.ndarray:
    """
    Ground truth flow [2, H, W] of a motion about the centre (W // 2, H // 2).
    """
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing='ij')
    centre = np.array([width // 2, height // 2], dtype=np.float64)
    points = np.stack([xs.reshape(-1), ys.reshape(-1)]) - centre[:, None]

    moved = motion.linear_part() @ points + centre[:, None] + motion.translation()[:, None]
    return (moved - (points + centre[:, None])).reshape(2, height, width)


def warp_backward(image: np.ndarray, motion: Motion) -> np.ndarray:
    """
    Frame 2 of a motion: every frame-2 pixel q samples frame 1 at the inverse map of q.
    """
    _, height, width = image.shape
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing='ij')
    centre = np.array([width // 2, height // 2], dtype=np.float64)
    targets = np.stack([xs.reshape(-1), ys.reshape(-1)]) - centre[:, None] - motion.translation()[:, None]

    sources = np.linalg.solve(motion.linear_part(), targets) + centre[:, None]
    warped = bilinear_sample_array(image[None].astype(np.float64), sources[None])
    return warped.reshape(image.shape).astype(np.float32)


def make_synthetic_pair(size: tuple[int, int], motion: Motion, seed: Optional[int] = None) -> SyntheticPair:
    """
    Generate a textured pair related by a parametric motion.
    :param size: (H, W), both multiples of 8.
    :param motion: The motion from frame 1 to frame 2.
    :param seed: Texture seed; defaults to the configured seed.
    :return: The synthetic pair with a full-resolution ground truth and an all-ones mask.
    """
    height, width = size
    if height <= 0 or width <= 0 or height % 8 or width % 8:
        raise ShapeMismatch(f'Synthetic pair size {height}x{width} must be positive multiples of 8')

    image1 = random_texture(height, width, get_rng(seed))
    image2 = warp_backward(image1, motion)
    flow = motion_flow(height, width, motion).astype(np.float32)

    return SyntheticPair(
        image1=Tensor(image1),
        image2=Tensor(image2),
        gt_flow=FlowField.from_array(flow[None], Resolution.FULL),
        valid=np.ones((height, width), dtype=bool),
    )
