"""
Hierarchical motion alignment: bring the quarter-resolution motion volume down to eighth
resolution, concatenate it with the eighth-resolution volume and reduce the channels.
"""

from dataclasses import dataclass
from typing import Optional
import numpy as np

from hmaflow.etc.consts import CORRELATION_DIM
from hmaflow.etc.enums import AlignmentMode
from hmaflow.etc.errors import InvalidConfiguration, ResolutionMismatch, ShapeMismatch
from hmaflow.nn import Module, Conv2d, Parameter
from hmaflow.tensor import Tensor, ConvSpec, conv2d, concat, relu, avg_pool2d, max_pool2d
from .cost_volume import MotionVolume

# Initial depthwise weight per alignment kernel, so the stage starts as an average
_AVERAGING_WEIGHT = {
    AlignmentMode.CONV2X2: 0.25,
    AlignmentMode.CONV3X3: 1.0 / 9.0,
}


@dataclass
class AlignedCostVolume:
    """
    The fused eighth-resolution cost volume, data [B, 324, H/8, W/8].
    """
    data: Tensor

    @property
    def channels(self) -> int:
        return self.data.shape[1]


def _as_mode(mode: AlignmentMode | str) -> AlignmentMode:
    try:
        return AlignmentMode(mode)
    except ValueError as e:
        choices = ', '.join(m.value for m in AlignmentMode)
        raise InvalidConfiguration(f'Unknown alignment mode {mode!r}, expected one of {choices}') from e


def alignment_spec(mode: AlignmentMode, channels: int) -> ConvSpec:
    """
    Depthwise stride-2 geometry of a convolutional alignment mode.
    """
    if mode is AlignmentMode.CONV2X2:
        return ConvSpec.build(channels, channels, 2, stride=2, groups=channels)
    if mode is AlignmentMode.CONV3X3:
        return ConvSpec.build(channels, channels, 3, stride=2, padding=1, groups=channels)
    raise InvalidConfiguration(f'Alignment mode {mode.value} has no convolution')


def align_alternative(m_quarter: Tensor,
                      mode: AlignmentMode | str,
                      weight: Optional[Tensor] = None,
                      bias: Optional[Tensor] = None,
                      ) -> Tensor:
    """
    Downsample a [B, d, 2h, 2w] motion volume to [B, d, h, w].

    Convolutional modes are depthwise, stride 2 and followed by ReLU; without explicit
    weights they use the averaging initialisation. Pooling modes are parameter-free.
    :param m_quarter: The quarter-resolution motion data.
    :param mode: The alignment operator.
    :param weight: Optional depthwise kernel [d, 1, k, k].
    :param bias: Optional bias [d].
    :return: The aligned tensor.
    """
    mode = _as_mode(mode)
    if mode is AlignmentMode.AVGPOOL:
        return avg_pool2d(m_quarter)
    if mode is AlignmentMode.MAXPOOL:
        return max_pool2d(m_quarter)

    channels = m_quarter.shape[1]
    spec = alignment_spec(mode, channels)
    if weight is None:
        weight = Tensor(np.full(spec.kernel, _AVERAGING_WEIGHT[mode], dtype=m_quarter.dtype))
    return relu(conv2d(m_quarter, spec, weight, bias))


class HierarchicalMotionAlignment(Module):
    """
    Align-and-fuse block. With hierarchical motion disabled only the eighth-resolution volume
    is reduced.
    """

    def __init__(self,
                 motion_channels: int,
                 out_channels: int = CORRELATION_DIM,
                 mode: AlignmentMode | str = AlignmentMode.CONV2X2,
                 hierarchical: bool = True,
                 rng: np.random.Generator = None,
                 ):
        super().__init__()
        self.motion_channels = motion_channels
        self.out_channels = out_channels
        self.mode = _as_mode(mode)
        self.hierarchical = hierarchical

        self.align_weight = None
        self.align_bias = None
        if hierarchical and self.mode in _AVERAGING_WEIGHT:
            spec = alignment_spec(self.mode, motion_channels)
            self.align_weight = Parameter(np.full(spec.kernel, _AVERAGING_WEIGHT[self.mode], dtype=np.float32))
            self.align_bias = Parameter(np.zeros(motion_channels, dtype=np.float32))

        fused_channels = 2 * motion_channels if hierarchical else motion_channels
        self.reduce = Conv2d(fused_channels, out_channels, 1, rng=rng)

    def align(self, m_quarter: Tensor) -> Tensor:
        return align_alternative(m_quarter, self.mode, self.align_weight, self.align_bias)

    def forward(self, m_quarter: Optional[MotionVolume], m_eighth: MotionVolume) -> AlignedCostVolume:
        eighth = m_eighth.data
        if eighth.shape[1] != self.motion_channels:
            raise ShapeMismatch(
                f'Eighth-level motion volume has {eighth.shape[1]} channels, expected {self.motion_channels}'
            )

        if not self.hierarchical:
            return AlignedCostVolume(relu(self.reduce(eighth)))

        if m_quarter is None:
            raise ResolutionMismatch('Hierarchical alignment requires a quarter-level motion volume')
        quarter = m_quarter.data
        if quarter.shape[1] != self.motion_channels:
            raise ShapeMismatch(
                f'Quarter-level motion volume has {quarter.shape[1]} channels, expected {self.motion_channels}'
            )
        if quarter.shape[0] != eighth.shape[0] \
                or quarter.shape[2] != 2 * eighth.shape[2] or quarter.shape[3] != 2 * eighth.shape[3]:
            raise ResolutionMismatch(
                f'Quarter-level volume {quarter.shape[2]}x{quarter.shape[3]} is not twice the '
                f'eighth-level volume {eighth.shape[2]}x{eighth.shape[3]}'
            )

        fused = concat([self.align(quarter), eighth], axis=1)
        return AlignedCostVolume(relu(self.reduce(fused)))


def align_and_fuse(m_quarter: MotionVolume,
                   m_eighth: MotionVolume,
                   module: HierarchicalMotionAlignment,
                   ) -> AlignedCostVolume:
    return module(m_quarter, m_eighth)
