"""
Exponentially weighted sequence loss over the refinement predictions.
"""

from typing import Optional, Sequence
import numpy as np

from hmaflow.etc.errors import InvalidConfiguration, ShapeMismatch
from hmaflow.model.config import LossConfig
from hmaflow.model.flow import FlowField
from hmaflow.tensor import Tensor


def loss_mask(gt: FlowField, valid: Optional[np.ndarray], max_flow: float) -> np.ndarray:
    """
    Pixels that take part in the loss: valid and with ground truth magnitude at most max_flow.
    :return: Boolean mask [B, 1, h, w].
    """
    gt_data = gt.data.data
    magnitude = np.sqrt(gt_data[:, 0] ** 2 + gt_data[:, 1] ** 2)
    mask = magnitude <= max_flow
    if valid is not None:
        mask = mask & np.broadcast_to(np.asarray(valid) >= 0.5, mask.shape)
    return mask[:, None]


def sequence_loss(predictions: Sequence[FlowField],
                  gt: FlowField,
                  valid: Optional[np.ndarray] = None,
                  config: Optional[LossConfig] = None,
                  ) -> Tensor:
    """
    Sum over predictions i = 1..N of gamma^(N - i) times the mean L1 flow error
    (|du| + |dv|) over the loss pixels.
    :param predictions: Full-resolution predictions in iteration order.
    :param gt: Ground truth flow.
    :param valid: Optional validity mask broadcastable to [B, h, w].
    :param config: Loss settings; defaults from the environment.
    :return: The scalar loss.
    """
    if not predictions:
        raise InvalidConfiguration('sequence_loss requires at least one prediction')
    config = config or LossConfig()

    mask = loss_mask(gt, valid, config.max_flow)
    count = int(mask.sum())
    if count == 0:
        raise InvalidConfiguration('No valid ground truth pixels for the loss')

    weight_map = Tensor(mask.astype(predictions[-1].data.dtype) / count)
    total = len(predictions)
    loss = None

    for i, prediction in enumerate(predictions):
        if prediction.data.shape != gt.data.shape:
            raise ShapeMismatch(
                f'Prediction {i} has shape {prediction.data.shape}, ground truth has {gt.data.shape}'
            )
        l1 = (prediction.data - gt.data).abs().sum(axis=1, keepdims=True)
        term = (l1 * weight_map).sum() * (config.gamma ** (total - i - 1))
        loss = term if loss is None else loss + term

    return loss
