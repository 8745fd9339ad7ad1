"""
Architecture, training and loss configuration models.
"""

from typing import Literal
from pydantic import BaseModel, ConfigDict, Field, field_validator

from hmaflow.etc.consts import CONFIG, FEATURE_DIM, CORRELATION_DIM, HIDDEN_DIM, CONTEXT_DIM, \
    DEFAULT_RADII, UPSAMPLE_FACTOR
from hmaflow.etc.enums import AlignmentMode, SearchStrategy
from .base import JsonModel


class ModelConfig(JsonModel):
    """
    Architecture choices of an HMAFlow model, including the ablation switches.
    """

    model_config = ConfigDict(
        extra='forbid',
        frozen=True,
    )

    feature_dim: int = Field(
        FEATURE_DIM,
        ge=1,
        description='Channel count of both feature encoder taps.',
    )
    hidden_dim: int = Field(
        HIDDEN_DIM,
        ge=1,
        description='Channel count of the GRU hidden state.',
    )
    context_dim: int = Field(
        CONTEXT_DIM,
        ge=1,
        description='Channel count of the context features injected into the GRU.',
    )
    correlation_dim: int = Field(
        CORRELATION_DIM,
        ge=1,
        description='Channel count of the aligned cost volume fed to attention and the GRU.',
    )
    radii: tuple[int, ...] = Field(
        DEFAULT_RADII,
        min_length=1,
        description='Search radii of the multi-scale correlation search, in block order.',
    )
    search_strategy: SearchStrategy = Field(
        SearchStrategy.MULTI_SCALE,
        description='How motion features are looked up from the base cost volumes.',
    )
    pyramid_levels: int = Field(
        4,
        ge=1,
        description='Number of pooled scales of the average-pooling search baseline.',
    )
    pyramid_radius: int = Field(
        4,
        ge=1,
        description='Window radius of the average-pooling search baseline.',
    )
    hierarchical_motion: bool = Field(
        True,
        description='Whether the quarter-resolution motion volume is aligned and fused.',
    )
    alignment: AlignmentMode = Field(
        AlignmentMode.CONV2X2,
        description='Operator used to bring the quarter-resolution motion volume to eighth resolution.',
    )
    use_csa: bool = Field(
        True,
        description='Whether the correlation self-attention block is applied.',
    )
    use_position_embedding: bool = Field(
        True,
        description='Whether the attention block adds a learned global position embedding.',
    )
    feature_normalization: Literal['instance', 'none'] = Field(
        'instance',
        description='Normalisation used inside the feature encoder.',
    )
    detach_lookup_flow: bool = Field(
        True,
        description='Whether the flow used for lookup centroids is detached at each refinement step.',
    )
    max_image_height: int = Field(
        default_factory=lambda: CONFIG.max_image_height,
        ge=8,
        description='Largest padded input height the position table is sized for.',
    )
    max_image_width: int = Field(
        default_factory=lambda: CONFIG.max_image_width,
        ge=8,
        description='Largest padded input width the position table is sized for.',
    )
    seed: int = Field(
        default_factory=lambda: CONFIG.seed,
        description='Seed of the parameter initialisation.',
    )

    @field_validator('radii')
    @classmethod
    def _validate_radii(cls, radii: tuple[int, ...]) -> tuple[int, ...]:
        if any(r <= 0 for r in radii):
            raise ValueError(f'Search radii must be positive, got {radii}')
        return radii

    @property
    def motion_channels(self) -> int:
        """
        Channel count d of one motion volume under the selected search strategy.
        """
        if self.search_strategy is SearchStrategy.AVERAGE_POOLING:
            return self.pyramid_levels * (2 * self.pyramid_radius + 1) ** 2
        return sum((2 * r + 1) ** 2 for r in self.radii)

    @property
    def max_tokens(self) -> int:
        """
        Number of eighth-resolution positions of the largest supported input.
        """
        return -(-self.max_image_height // UPSAMPLE_FACTOR) * -(-self.max_image_width // UPSAMPLE_FACTOR)


class TrainingConfig(BaseModel):
    """
    Optimiser and schedule settings of the desk-scale trainer.
    """

    model_config = ConfigDict(extra='forbid')

    steps: int = Field(
        500,
        ge=1,
        description='Number of optimiser steps.',
    )
    iters: int = Field(
        default_factory=lambda: CONFIG.train_iters,
        ge=1,
        description='Refinement iterations per forward pass.',
    )
    learning_rate: float = Field(
        default_factory=lambda: CONFIG.learning_rate,
        gt=0,
        description='Peak learning rate.',
    )
    weight_decay: float = Field(
        default_factory=lambda: CONFIG.weight_decay,
        ge=0,
        description='Decoupled weight decay.',
    )
    grad_clip: float = Field(
        default_factory=lambda: CONFIG.grad_clip,
        gt=0,
        description='Maximum global gradient norm.',
    )
    warmup_fraction: float = Field(
        default_factory=lambda: CONFIG.warmup_fraction,
        ge=0,
        lt=1,
        description='Fraction of steps spent in linear warmup.',
    )
    seed: int = Field(
        default_factory=lambda: CONFIG.seed,
        description='Seed of the synthetic training pair.',
    )


class LossConfig(BaseModel):
    """
    Sequence loss settings.
    """

    model_config = ConfigDict(extra='forbid')

    gamma: float = Field(
        default_factory=lambda: CONFIG.loss_gamma,
        gt=0,
        le=1,
        description='Exponential weighting factor; prediction i of N is weighted gamma^(N - i).',
    )
    max_flow: float = Field(
        default_factory=lambda: CONFIG.max_flow,
        gt=0,
        description='Ground truth magnitude above which pixels are excluded.',
    )
