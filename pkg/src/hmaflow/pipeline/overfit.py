"""
Desk-scale training: overfit the full model on one synthetic pair.
"""

import math
from typing import Optional
import numpy as np

from hmaflow.etc.consts import LOGGER
from hmaflow.etc.errors import NonFiniteValues
from hmaflow.etc.utils import iter_progress, verbose_print
from hmaflow.io.synthetic import Motion, make_synthetic_pair
from hmaflow.model.config import LossConfig, ModelConfig, TrainingConfig
from hmaflow.model.flow import SyntheticPair
from hmaflow.model.report import OverfitReport
from hmaflow.network import HmaFlow
from hmaflow.supervision import epe, sequence_loss
from hmaflow.tensor import no_grad
from .optim import AdamW, WarmupCosineSchedule, clip_grad_norm


def _batched(pair: SyntheticPair):
    return pair.image1.reshape(1, *pair.image1.shape), pair.image2.reshape(1, *pair.image2.shape)


def train_step(model: HmaFlow,
               optimizer: AdamW,
               pair: SyntheticPair,
               lr: float,
               training: TrainingConfig,
               loss_config: LossConfig,
               ) -> float:
    """
    One forward pass, backward pass and optimiser update.
    :return: The sequence loss before the update.
    """
    image1, image2 = _batched(pair)

    optimizer.zero_grad()
    predictions = model(image1, image2, iters=training.iters)
    loss = sequence_loss(predictions, pair.gt_flow, pair.valid, loss_config)

    value = loss.item()
    if not math.isfinite(value):
        raise NonFiniteValues(f'Training loss became non-finite ({value})')

    loss.backward()
    clip_grad_norm(optimizer.params, training.grad_clip)
    optimizer.step(lr)
    return value


def evaluate_iterations(model: HmaFlow, pair: SyntheticPair, iters: int) -> list[float]:
    """
    EPE of every refinement iteration on a pair, without graph recording.
    """
    image1, image2 = _batched(pair)
    model.eval()
    with no_grad():
        predictions = model(image1, image2, iters=iters)
    return [epe(prediction, pair.gt_flow, pair.valid) for prediction in predictions]


def run_overfit(size: tuple[int, int],
                motion: Motion,
                training: Optional[TrainingConfig] = None,
                model_config: Optional[ModelConfig] = None,
                loss_config: Optional[LossConfig] = None,
                ) -> tuple[OverfitReport, HmaFlow]:
    """
    Train a freshly initialised model on a single synthetic pair.
    :param size: (H, W) of the pair, multiples of 8.
    :param motion: Motion relating the two frames.
    :param training: Optimiser and schedule settings.
    :param model_config: Architecture of the model.
    :param loss_config: Sequence loss settings.
    :return: The report and the trained model, in evaluation mode.
    """
    training = training or TrainingConfig()
    model_config = model_config or ModelConfig()
    loss_config = loss_config or LossConfig()

    pair = make_synthetic_pair(size, motion, seed=training.seed)
    model = HmaFlow(model_config).train()
    optimizer = AdamW(model.parameters(), lr=training.learning_rate, weight_decay=training.weight_decay)
    schedule = WarmupCosineSchedule(training.learning_rate, training.steps, training.warmup_fraction)

    LOGGER.info(
        'Overfitting %dx%d %s pair for %d steps (%d iterations, lr %.2e)',
        size[0], size[1], motion.kind.value, training.steps, training.iters, training.learning_rate,
    )

    loss = float('nan')
    for step in iter_progress(range(training.steps), description='Overfitting...', total=training.steps):
        loss = train_step(model, optimizer, pair, schedule(step), training, loss_config)
        verbose_print(f'step {step + 1}/{training.steps}: loss {loss:.4f}')

    per_iter_epe = evaluate_iterations(model, pair, training.iters)
    report = OverfitReport(
        steps=training.steps,
        final_loss=loss,
        final_epe=per_iter_epe[-1],
        per_iter_epe=per_iter_epe,
    )
    LOGGER.info('Overfit finished: loss %.4f, EPE %.4f px', report.final_loss, report.final_epe)

    return report, model


def zero_flow_epe(size: tuple[int, int], motion: Motion, seed: Optional[int] = None) -> float:
    """
    EPE of predicting zero flow on the pair `run_overfit` would train on.
    """
    pair = make_synthetic_pair(size, motion, seed=seed)
    return epe(np.zeros_like(pair.gt_flow.numpy()), pair.gt_flow, pair.valid)
