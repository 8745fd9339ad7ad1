"""
Flow field and synthetic pair containers.
"""

from dataclasses import dataclass, field
import numpy as np

from hmaflow.etc.enums import Resolution
from hmaflow.etc.errors import ShapeMismatch
from hmaflow.tensor import Tensor


@dataclass
class FlowField:
    """
    Per-pixel (u, v) displacements in pixels at the field's own resolution.
    `data` has shape [B, 2, h, w], channel 0 horizontal and channel 1 vertical.
    """
    data: Tensor
    resolution: Resolution = Resolution.FULL

    def __post_init__(self):
        if not isinstance(self.data, Tensor):
            self.data = Tensor(self.data)
        if self.data.ndim != 4 or self.data.shape[1] != 2:
            raise ShapeMismatch(f'A flow field has shape [B, 2, h, w], got {self.data.shape}')

    @classmethod
    def zeros(cls, batch: int, height: int, width: int, resolution: Resolution = Resolution.FULL) -> 'FlowField':
        return cls(Tensor(np.zeros((batch, 2, height, width), dtype=np.float32)), resolution)

    @classmethod
    def from_array(cls, array: np.ndarray, resolution: Resolution = Resolution.FULL) -> 'FlowField':
        """
        Build a field from an [h, w, 2], [2, h, w] or [B, 2, h, w] array.
        """
        array = np.asarray(array, dtype=np.float32)
        if array.ndim == 3 and array.shape[-1] == 2 and array.shape[0] != 2:
            array = array.transpose(2, 0, 1)
        if array.ndim == 3:
            array = array[None]
        return cls(Tensor(np.ascontiguousarray(array)), resolution)

    @property
    def u(self) -> Tensor:
        return self.data[:, 0:1]

    @property
    def v(self) -> Tensor:
        return self.data[:, 1:2]

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    def numpy(self) -> np.ndarray:
        return self.data.numpy()

    def to_hw2(self, index: int = 0) -> np.ndarray:
        """
        One batch item as an [h, w, 2] array, the layout of .flo files.
        """
        return np.ascontiguousarray(self.data.data[index].transpose(1, 2, 0))

    def detach(self) -> 'FlowField':
        return FlowField(self.data.detach(), self.resolution)


@dataclass
class SyntheticPair:
    """
    Two frames with exact ground truth: image2 is image1 backward-warped by the flow.
    """
    image1: Tensor
    image2: Tensor
    gt_flow: FlowField
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones((self.gt_flow.height, self.gt_flow.width), dtype=bool)
