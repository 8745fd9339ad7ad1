"""
The full HMAFlow model: feature and context encoders followed by the refiner.
"""

from typing import Callable, Optional

from hmaflow.etc.consts import CONFIG, LOGGER
from hmaflow.etc.utils import get_rng
from hmaflow.model.config import ModelConfig
from hmaflow.model.flow import FlowField
from hmaflow.nn import Module
from hmaflow.tensor import Tensor
from .encoders import ContextEncoder, FeatureEncoder
from .updater import Refiner, RefinementStep


class HmaFlow(Module):
    """
    Optical flow network. All parameters are drawn from one generator seeded by
    `config.seed`, so two models built from equal configs are identical.
    """

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config or ModelConfig()
        rng = get_rng(self.config.seed)

        self.feature_encoder = FeatureEncoder(self.config, rng)
        self.context_encoder = ContextEncoder(self.config, rng)
        self.refiner = Refiner(self.config, rng)

        LOGGER.debug(
            'Built HMAFlow model with %d parameters (motion channels %d, alignment %s, attention %s)',
            self.num_parameters(),
            self.config.motion_channels,
            self.config.alignment.value,
            'on' if self.config.use_csa else 'off',
        )

    def forward(self,
                image1: Tensor,
                image2: Tensor,
                iters: Optional[int] = None,
                flow_init: Optional[FlowField] = None,
                on_step: Optional[Callable[[RefinementStep], None]] = None,
                ) -> list[FlowField]:
        """
        Estimate flow from image1 to image2.
        :param image1: Frame 1, [B, 3, H, W] in [-1, 1], H and W multiples of 8.
        :param image2: Frame 2, same shape.
        :param iters: Refinement iterations; defaults to the configured training or
            inference count depending on the module mode.
        :param flow_init: Optional eighth-resolution warm-start flow.
        :param on_step: Optional per-iteration observer.
        :return: Full-resolution predictions of every iteration.
        """
        if iters is None:
            iters = CONFIG.train_iters if self.training else CONFIG.infer_iters

        features = self.feature_encoder(image1, image2)
        context = self.context_encoder(image1)
        return self.refiner(features, context, iters, flow_init, on_step)
