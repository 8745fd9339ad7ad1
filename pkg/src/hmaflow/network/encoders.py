"""
Feature and context encoders.

Both encoders share the residual backbone layout (7x7 stem, then stages of 64, 96 and 128
channels at strides 2, 4 and 8) and tap the stride-4 and stride-8 stages. The feature
encoder projects both taps to the same channel count; the context encoder fuses the
stride-4 tap into the stride-8 tap through a strided convolution before splitting it into
the initial GRU state and the injected context.
"""

from dataclasses import dataclass
import numpy as np

from hmaflow.etc.errors import ShapeMismatch
from hmaflow.model.config import ModelConfig
from hmaflow.nn import Module, ModuleList, Conv2d, InstanceNorm2d
from hmaflow.tensor import Tensor, concat, relu, tanh

STAGE_CHANNELS = (64, 96, 128)


@dataclass
class FeatureSet:
    """
    Feature maps of both frames at quarter and eighth resolution.
    """
    f1_quarter: Tensor
    f1_eighth: Tensor
    f2_quarter: Tensor
    f2_eighth: Tensor


@dataclass
class ContextSet:
    """
    Initial GRU state (tanh-bounded) and the non-negative context features of frame 1.
    """
    hidden_init: Tensor
    context: Tensor


def check_divisible(image: Tensor):
    """
    Validate that an image batch is [B, 3, H, W] with H and W multiples of 8.
    """
    if image.ndim != 4 or image.shape[1] != 3:
        raise ShapeMismatch(f'Expected an image batch of shape [B, 3, H, W], got {image.shape}')
    height, width = image.shape[2:]
    if height % 8 or width % 8:
        raise ShapeMismatch(
            f'Image size {height}x{width} is not divisible by 8; pad the input to a multiple of 8 first'
        )


class ResidualBlock(Module):
    """
    Two 3x3 convolutions with an identity (or strided 1x1) shortcut.
    """

    def __init__(self,
                 in_channels: int,
                 out_channels: int,
                 stride: int,
                 normalization: bool,
                 rng: np.random.Generator,
                 ):
        super().__init__()
        self.conv1 = Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, rng=rng)
        self.conv2 = Conv2d(out_channels, out_channels, 3, padding=1, rng=rng)
        self.norm = InstanceNorm2d() if normalization else None

        self.downsample = None
        if stride != 1 or in_channels != out_channels:
            self.downsample = Conv2d(in_channels, out_channels, 1, stride=stride, rng=rng)

    def _normalize(self, x: Tensor) -> Tensor:
        return self.norm(x) if self.norm is not None else x

    def forward(self, x: Tensor) -> Tensor:
        y = relu(self._normalize(self.conv1(x)))
        y = relu(self._normalize(self.conv2(y)))

        if self.downsample is not None:
            x = self._normalize(self.downsample(x))

        return relu(x + y)


class Backbone(Module):
    """
    Residual backbone returning its stride-4 and stride-8 stage outputs.
    """

    def __init__(self, normalization: bool, rng: np.random.Generator):
        super().__init__()
        self.normalization = normalization
        self.stem = Conv2d(3, STAGE_CHANNELS[0], 7, stride=2, padding=3, rng=rng)
        self.norm = InstanceNorm2d() if normalization else None

        self.stages = ModuleList()
        in_channels = STAGE_CHANNELS[0]
        for index, channels in enumerate(STAGE_CHANNELS):
            stride = 1 if index == 0 else 2
            self.stages.append(ModuleList([
                ResidualBlock(in_channels, channels, stride, normalization, rng),
                ResidualBlock(channels, channels, 1, normalization, rng),
            ]))
            in_channels = channels

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        x = self.stem(x)
        if self.norm is not None:
            x = self.norm(x)
        x = relu(x)

        taps = []
        for stage in self.stages:
            for block in stage:
                x = block(x)
            taps.append(x)

        return taps[1], taps[2]


class FeatureEncoder(Module):
    """
    Weight-shared two-level feature encoder.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.backbone = Backbone(config.feature_normalization == 'instance', rng)
        self.proj_quarter = Conv2d(STAGE_CHANNELS[1], config.feature_dim, 1, rng=rng)
        self.proj_eighth = Conv2d(STAGE_CHANNELS[2], config.feature_dim, 1, rng=rng)

    def forward(self, image1: Tensor, image2: Tensor) -> FeatureSet:
        check_divisible(image1)
        check_divisible(image2)
        if image1.shape != image2.shape:
            raise ShapeMismatch(f'Frames differ in shape: {image1.shape} vs {image2.shape}')

        # Both frames go through one batched pass
        batch = image1.shape[0]
        quarter, eighth = self.backbone(concat([image1, image2], axis=0))
        quarter = self.proj_quarter(quarter)
        eighth = self.proj_eighth(eighth)

        return FeatureSet(
            f1_quarter=quarter[:batch],
            f1_eighth=eighth[:batch],
            f2_quarter=quarter[batch:],
            f2_eighth=eighth[batch:],
        )


class ContextEncoder(Module):
    """
    Context encoder with skip fusion of the quarter-resolution tap.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.hidden_dim = config.hidden_dim
        out_channels = config.hidden_dim + config.context_dim

        self.backbone = Backbone(False, rng)
        self.fuse_quarter = Conv2d(STAGE_CHANNELS[1], out_channels, 3, stride=2, padding=1, rng=rng)
        self.proj_eighth = Conv2d(STAGE_CHANNELS[2], out_channels, 1, rng=rng)

    def forward(self, image1: Tensor) -> ContextSet:
        check_divisible(image1)
        quarter, eighth = self.backbone(image1)
        fused = self.proj_eighth(eighth) + self.fuse_quarter(quarter)

        return ContextSet(
            hidden_init=tanh(fused[:, :self.hidden_dim]),
            context=relu(fused[:, self.hidden_dim:]),
        )


def encode_features(image1: Tensor, image2: Tensor, encoder: FeatureEncoder) -> FeatureSet:
    return encoder(image1, image2)


def encode_context(image1: Tensor, encoder: ContextEncoder) -> ContextSet:
    return encoder(image1)
