"""
Iterative refinement: motion encoding, separable convolutional GRU, flow and mask heads,
and convex upsampling of the eighth-resolution flow to full resolution.
"""

from dataclasses import dataclass
from typing import Callable, Optional
import numpy as np

from hmaflow.etc.consts import LOGGER, UPSAMPLE_FACTOR
from hmaflow.etc.enums import Level, Resolution, SearchStrategy
from hmaflow.etc.errors import InvalidConfiguration, ResolutionMismatch, ShapeMismatch
from hmaflow.model.config import ModelConfig
from hmaflow.model.flow import FlowField
from hmaflow.nn import Module, Conv2d
from hmaflow.tensor import Tensor, concat, relu, sigmoid, tanh, softmax, pad_replicate
from .cost_volume import BaseCostVolume, MotionVolume, build_base_volume, build_pooled_pyramid, \
    multi_scale_search, pyramid_search
from .csa import CorrelationSelfAttention
from .encoders import ContextSet, FeatureSet
from .hma import HierarchicalMotionAlignment

MOTION_FEATURES = 128
HEAD_CHANNELS = 256


class MotionEncoder(Module):
    """
    Encodes the attended cost volume and the current flow into 128 motion channels, the
    last two of which are the flow itself.
    """

    def __init__(self, corr_channels: int, rng: np.random.Generator = None):
        super().__init__()
        self.conv_corr1 = Conv2d(corr_channels, 256, 1, rng=rng)
        self.conv_corr2 = Conv2d(256, 192, 3, padding=1, rng=rng)
        self.conv_flow1 = Conv2d(2, 128, 7, padding=3, rng=rng)
        self.conv_flow2 = Conv2d(128, 64, 3, padding=1, rng=rng)
        self.conv_out = Conv2d(192 + 64, MOTION_FEATURES - 2, 3, padding=1, rng=rng)

    def forward(self, corr: Tensor, flow: Tensor) -> Tensor:
        corr_features = relu(self.conv_corr2(relu(self.conv_corr1(corr))))
        flow_features = relu(self.conv_flow2(relu(self.conv_flow1(flow))))
        out = relu(self.conv_out(concat([corr_features, flow_features], axis=1)))
        return concat([out, flow], axis=1)


class ConvGRU(Module):
    def __init__(self,
                 hidden_dim: int,
                 input_dim: int,
                 kernel_size: tuple[int, int],
                 padding: tuple[int, int],
                 rng: np.random.Generator = None,
                 ):
        super().__init__()
        self.conv_z = Conv2d(hidden_dim + input_dim, hidden_dim, kernel_size, padding=padding, rng=rng)
        self.conv_r = Conv2d(hidden_dim + input_dim, hidden_dim, kernel_size, padding=padding, rng=rng)
        self.conv_q = Conv2d(hidden_dim + input_dim, hidden_dim, kernel_size, padding=padding, rng=rng)

    def forward(self, h: Tensor, x: Tensor) -> Tensor:
        hx = concat([h, x], axis=1)
        z = sigmoid(self.conv_z(hx))
        r = sigmoid(self.conv_r(hx))
        q = tanh(self.conv_q(concat([r * h, x], axis=1)))
        return (1.0 - z) * h + z * q


class SepConvGRU(Module):
    """
    A horizontal (1x5) GRU step followed by a vertical (5x1) one.
    """

    def __init__(self, hidden_dim: int, input_dim: int, rng: np.random.Generator = None):
        super().__init__()
        self.horizontal = ConvGRU(hidden_dim, input_dim, (1, 5), (0, 2), rng=rng)
        self.vertical = ConvGRU(hidden_dim, input_dim, (5, 1), (2, 0), rng=rng)

    def forward(self, h: Tensor, x: Tensor) -> Tensor:
        return self.vertical(self.horizontal(h, x), x)


class FlowHead(Module):
    def __init__(self, hidden_dim: int, rng: np.random.Generator = None):
        super().__init__()
        self.conv1 = Conv2d(hidden_dim, HEAD_CHANNELS, 3, padding=1, rng=rng)
        self.conv2 = Conv2d(HEAD_CHANNELS, 2, 3, padding=1, rng=rng)
        # Training starts from the zero-flow estimate
        self.conv2.weight.data[...] = 0.0

    def forward(self, h: Tensor) -> Tensor:
        return self.conv2(relu(self.conv1(h)))


class MaskHead(Module):
    def __init__(self, hidden_dim: int, rng: np.random.Generator = None):
        super().__init__()
        self.conv1 = Conv2d(hidden_dim, HEAD_CHANNELS, 3, padding=1, rng=rng)
        self.conv2 = Conv2d(HEAD_CHANNELS, 9 * UPSAMPLE_FACTOR ** 2, 1, rng=rng)

    def forward(self, h: Tensor) -> Tensor:
        # Scaled to balance gradients against the flow head
        return self.conv2(relu(self.conv1(h))) * 0.25


def convex_upsample(flow: FlowField, mask: Tensor) -> FlowField:
    """
    Full-resolution flow as convex combinations of the 3x3 coarse neighbours of 8x the flow.

    Borders replicate the outermost coarse cells, so a constant field stays constant.
    :param flow: The eighth-resolution flow [B, 2, h, w].
    :param mask: Mask logits [B, 9 * 64, h, w], softmaxed over the 9 neighbours.
    :return: The full-resolution flow [B, 2, 8h, 8w].
    """
    factor = UPSAMPLE_FACTOR
    batch, _, height, width = flow.data.shape
    if mask.shape != (batch, 9 * factor * factor, height, width):
        raise ShapeMismatch(
            f'Upsampling mask has shape {mask.shape}, expected {(batch, 9 * factor * factor, height, width)}'
        )

    weights = softmax(mask.reshape(batch, 1, 9, factor, factor, height, width), axis=2)

    padded = pad_replicate(flow.data * float(factor), 1, 1, 1, 1)
    neighbours = concat([
        padded[:, :, ky:ky + height, kx:kx + width].reshape(batch, 2, 1, height, width)
        for ky in range(3)
        for kx in range(3)
    ], axis=2).reshape(batch, 2, 9, 1, 1, height, width)

    up = (weights * neighbours).sum(axis=2)
    up = up.permute(0, 1, 4, 2, 5, 3).reshape(batch, 2, factor * height, factor * width)
    return FlowField(up, Resolution.FULL)


@dataclass
class RefinementStep:
    """
    State observed after one refinement iteration.
    """
    iteration: int
    lookup_flow: FlowField
    hidden: Tensor
    flow: FlowField


class Refiner(Module):
    """
    Search, align, attend and update loop over the two-level cost volumes.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator = None):
        super().__init__()
        self.config = config
        self.hma = HierarchicalMotionAlignment(
            motion_channels=config.motion_channels,
            out_channels=config.correlation_dim,
            mode=config.alignment,
            hierarchical=config.hierarchical_motion,
            rng=rng,
        )
        self.csa = CorrelationSelfAttention(
            dim=config.correlation_dim,
            max_tokens=config.max_tokens,
            enabled=config.use_csa,
            use_position_embedding=config.use_position_embedding,
            rng=rng,
        )
        self.motion_encoder = MotionEncoder(config.correlation_dim, rng=rng)
        self.gru = SepConvGRU(config.hidden_dim, MOTION_FEATURES + config.context_dim, rng=rng)
        self.flow_head = FlowHead(config.hidden_dim, rng=rng)
        self.mask_head = MaskHead(config.hidden_dim, rng=rng)

    def _volumes(self, features: FeatureSet) -> dict[Level, BaseCostVolume | list[BaseCostVolume]]:
        volumes: dict[Level, BaseCostVolume | list[BaseCostVolume]] = {
            Level.EIGHTH: build_base_volume(features.f1_eighth, features.f2_eighth, Level.EIGHTH),
        }
        if self.config.hierarchical_motion:
            volumes[Level.QUARTER] = build_base_volume(features.f1_quarter, features.f2_quarter, Level.QUARTER)

        if self.config.search_strategy is SearchStrategy.AVERAGE_POOLING:
            for level, vol in volumes.items():
                volumes[level] = build_pooled_pyramid(vol, self.config.pyramid_levels)
        return volumes

    def _search(self, vol: BaseCostVolume | list[BaseCostVolume], flow: FlowField) -> MotionVolume:
        if self.config.search_strategy is SearchStrategy.AVERAGE_POOLING:
            return pyramid_search(vol, flow, self.config.pyramid_radius)
        return multi_scale_search(vol, flow, self.config.radii)

    @staticmethod
    def _initial_flow(features: FeatureSet, init_flow: Optional[FlowField]) -> FlowField:
        batch, _, height, width = features.f1_eighth.shape
        if init_flow is None:
            return FlowField.zeros(batch, height, width, Resolution.EIGHTH)

        if init_flow.resolution is not Resolution.EIGHTH:
            raise ResolutionMismatch(
                f'Warm-start flow must be at eighth resolution, got {init_flow.resolution.value}'
            )
        if init_flow.data.shape != (batch, 2, height, width):
            raise ResolutionMismatch(
                f'Warm-start flow has shape {init_flow.data.shape}, expected {(batch, 2, height, width)}'
            )
        return FlowField(init_flow.data.astype(features.f1_eighth.dtype).detach(), Resolution.EIGHTH)

    def forward(self,
                features: FeatureSet,
                context: ContextSet,
                iters: int,
                init_flow: Optional[FlowField] = None,
                on_step: Optional[Callable[[RefinementStep], None]] = None,
                ) -> list[FlowField]:
        """
        Run `iters` refinement iterations.
        :param features: Two-level features of both frames.
        :param context: Initial hidden state and context of frame 1.
        :param iters: Number of iterations, at least one.
        :param init_flow: Optional eighth-resolution warm-start flow.
        :param on_step: Optional observer called after every iteration.
        :return: The full-resolution prediction of every iteration, in order.
        """
        if iters < 1:
            raise InvalidConfiguration(f'At least one refinement iteration is required, got {iters}')

        volumes = self._volumes(features)
        flow = self._initial_flow(features, init_flow)
        hidden = context.hidden_init
        predictions = []

        for iteration in range(iters):
            lookup = flow.detach() if self.config.detach_lookup_flow else flow

            m_eighth = self._search(volumes[Level.EIGHTH], lookup)
            m_quarter = self._search(volumes[Level.QUARTER], lookup) if self.config.hierarchical_motion else None
            aligned = self.csa(self.hma(m_quarter, m_eighth))

            motion = self.motion_encoder(aligned.data, lookup.data)
            hidden = self.gru(hidden, concat([context.context, motion], axis=1))

            delta = self.flow_head(hidden)
            flow = FlowField(lookup.data + delta, Resolution.EIGHTH)
            predictions.append(convex_upsample(flow, self.mask_head(hidden)))

            if on_step is not None:
                on_step(RefinementStep(iteration, lookup, hidden, flow))
            LOGGER.debug('Refinement iteration %d/%d done', iteration + 1, iters)

        return predictions


def refine(features: FeatureSet,
           context: ContextSet,
           refiner: Refiner,
           iters: int,
           init_flow: Optional[FlowField] = None,
           ) -> list[FlowField]:
    return refiner(features, context, iters, init_flow)
