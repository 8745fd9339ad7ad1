"""
Correlation self-attention over the aligned cost volume.

The eighth-resolution positions form the token sequence (N = H/8 * W/8 tokens of the
volume's channel width). One pre-norm single-head attention layer and one pre-norm MLP,
each with a residual connection, reweight the volume globally.
"""

import math
import numpy as np

from hmaflow.etc.errors import CapacityExceeded, ShapeMismatch
from hmaflow.nn import Module, Conv2d, Linear, LayerNorm, Parameter
from hmaflow.tensor import Tensor, gelu, softmax
from .hma import AlignedCostVolume


class CorrelationSelfAttention(Module):
    """
    Single-head attention block with an optional learned global position embedding.
    A disabled block owns no parameters and returns its input unchanged.
    """

    def __init__(self,
                 dim: int,
                 max_tokens: int,
                 enabled: bool = True,
                 use_position_embedding: bool = True,
                 rng: np.random.Generator = None,
                 ):
        super().__init__()
        self.dim = dim
        self.max_tokens = max_tokens
        self.enabled = enabled
        self.use_position_embedding = use_position_embedding and enabled

        if not enabled:
            return

        self.pre_proj = Conv2d(dim, dim, 1, rng=rng)
        self.pos_embed = None
        if self.use_position_embedding:
            self.pos_embed = Parameter(np.zeros((max_tokens, dim), dtype=np.float32))

        self.norm1 = LayerNorm(dim)
        self.query = Linear(dim, dim, rng=rng)
        self.key = Linear(dim, dim, rng=rng)
        self.value = Linear(dim, dim, rng=rng)

        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(dim, 2 * dim, rng=rng)
        self.fc2 = Linear(2 * dim, dim, rng=rng)

    def _check(self, vol: AlignedCostVolume):
        data = vol.data
        if data.ndim != 4 or data.shape[1] != self.dim:
            raise ShapeMismatch(f'Attention expects a [B, {self.dim}, H, W] volume, got {data.shape}')
        tokens = data.shape[2] * data.shape[3]
        if tokens > self.max_tokens:
            raise CapacityExceeded(
                f'Volume has {tokens} positions but the position table holds {self.max_tokens}; '
                f'rebuild the model with max_tokens >= {tokens} (a larger max image size)'
            )

    def tokens(self, vol: AlignedCostVolume) -> Tensor:
        """
        Project the volume and flatten it into [B, N, dim] tokens with position embedding.
        """
        self._check(vol)
        batch, dim, height, width = vol.data.shape
        tokens = height * width

        x = self.pre_proj(vol.data).reshape(batch, dim, tokens).transpose(1, 2)
        if self.pos_embed is not None:
            x = x + self.pos_embed[:tokens]
        return x

    def _attention(self, h: Tensor) -> Tensor:
        logits = (self.query(h) @ self.key(h).transpose(1, 2)) * (1.0 / math.sqrt(self.dim))
        return softmax(logits, axis=-1)

    def attention_weights(self, vol: AlignedCostVolume) -> Tensor:
        """
        The softmaxed attention matrix [B, N, N] of the first layer.
        """
        if not self.enabled:
            raise ShapeMismatch('Attention weights are undefined for a disabled attention block')
        return self._attention(self.norm1(self.tokens(vol)))

    def forward(self, vol: AlignedCostVolume) -> AlignedCostVolume:
        if not self.enabled:
            return vol

        batch, dim, height, width = vol.data.shape
        x = self.tokens(vol)

        h = self.norm1(x)
        x = x + self._attention(h) @ self.value(h)
        x = x + self.fc2(gelu(self.fc1(self.norm2(x))))

        return AlignedCostVolume(x.transpose(1, 2).reshape(batch, dim, height, width))


def csa_forward(vol: AlignedCostVolume, module: CorrelationSelfAttention) -> AlignedCostVolume:
    return module(vol)


def attention_weights(vol: AlignedCostVolume, module: CorrelationSelfAttention) -> Tensor:
    return module.attention_weights(vol)
