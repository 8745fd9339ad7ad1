"""
Padded, gradient-free flow estimation for arbitrary image sizes.
"""

from typing import Optional
import numpy as np

from hmaflow.etc.consts import CONFIG, UPSAMPLE_FACTOR
from hmaflow.etc.enums import Resolution
from hmaflow.etc.errors import ResolutionMismatch, ShapeMismatch
from hmaflow.io.image import InputPadder
from hmaflow.model.flow import FlowField
from hmaflow.network import HmaFlow
from hmaflow.tensor import Tensor, no_grad


def _as_batch(image: Tensor) -> Tensor:
    if image.ndim == 3:
        return image.reshape(1, *image.shape)
    if image.ndim != 4:
        raise ShapeMismatch(f'Expected a [3, H, W] or [B, 3, H, W] image, got {image.shape}')
    return image


def downsample_flow(flow: np.ndarray) -> np.ndarray:
    """
    Eighth-resolution flow from a full-resolution [B, 2, H, W] array with H and W multiples
    of 8: the mean of every 8x8 block, divided by 8.
    """
    batch, _, height, width = flow.shape
    factor = UPSAMPLE_FACTOR
    blocks = flow.reshape(batch, 2, height // factor, factor, width // factor, factor)
    return blocks.mean(axis=(3, 5)) / factor


def warm_start_flow(warm_start: FlowField, padder: InputPadder, batch: int) -> FlowField:
    """
    Convert a previous estimate into the eighth-resolution initial flow of the padded input.

    An eighth-resolution field must already match the padded input; a full-resolution field
    must match the original input and is padded and block-averaged.
    """
    padded_h, padded_w = padder.padded_size
    eighth_shape = (batch, 2, padded_h // UPSAMPLE_FACTOR, padded_w // UPSAMPLE_FACTOR)

    if warm_start.resolution is Resolution.EIGHTH:
        if warm_start.data.shape != eighth_shape:
            raise ResolutionMismatch(
                f'Eighth-resolution warm start has shape {warm_start.data.shape}, expected {eighth_shape}'
            )
        return warm_start

    if warm_start.data.shape != (batch, 2, padder.height, padder.width):
        raise ResolutionMismatch(
            f'Full-resolution warm start has shape {warm_start.data.shape}, '
            f'expected {(batch, 2, padder.height, padder.width)}'
        )
    with no_grad():
        padded = padder.pad(warm_start.data).numpy()
    return FlowField(Tensor(downsample_flow(padded).astype(np.float32)), Resolution.EIGHTH)


def estimate_flow(model: HmaFlow,
                  image1: Tensor,
                  image2: Tensor,
                  iters: Optional[int] = None,
                  warm_start: Optional[FlowField] = None,
                  ) -> FlowField:
    """
    Estimate full-resolution flow between two frames of any size.

    Inputs are replicate-padded to multiples of 8, the model runs without graph recording in
    the calling thread, and the last prediction is cropped back to the input size.
    :param model: The flow model.
    :param image1: Frame 1, [3, H, W] or [B, 3, H, W] in [-1, 1].
    :param image2: Frame 2, same shape.
    :param iters: Refinement iterations; defaults to the configured inference count.
    :param warm_start: Optional previous flow, eighth-resolution of the padded input or
        full-resolution of the original input.
    :return: The final prediction [B, 2, H, W].
    """
    image1 = _as_batch(image1)
    image2 = _as_batch(image2)
    if image1.shape != image2.shape:
        raise ShapeMismatch(f'Frames differ in shape: {image1.shape} vs {image2.shape}')

    batch, _, height, width = image1.shape
    padder = InputPadder(height, width)

    with no_grad():
        init_flow = warm_start_flow(warm_start, padder, batch) if warm_start is not None else None
        predictions = model(
            padder.pad(image1),
            padder.pad(image2),
            iters=CONFIG.infer_iters if iters is None else iters,
            flow_init=init_flow,
        )
        flow = padder.unpad(predictions[-1].data)

    return FlowField(flow, Resolution.FULL)
