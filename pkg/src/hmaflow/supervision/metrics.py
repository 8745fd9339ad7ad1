"""
Flow accuracy metrics: endpoint error, KITTI outlier percentage and threshold accuracies.
"""

from typing import Optional
import numpy as np

from hmaflow.etc.errors import InvalidConfiguration, ShapeMismatch
from hmaflow.model.flow import FlowField
from hmaflow.model.report import FlowMetrics

FlowLike = FlowField | np.ndarray


def _as_b2hw(flow: FlowLike) -> np.ndarray:
    if isinstance(flow, FlowField):
        return flow.data.data.astype(np.float64)
    array = np.asarray(flow, dtype=np.float64)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4 or array.shape[1] != 2:
        raise ShapeMismatch(f'Expected a [B, 2, h, w] flow, got shape {array.shape}')
    return array


def endpoint_errors(pred: FlowLike,
                    gt: FlowLike,
                    valid: Optional[np.ndarray] = None,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """
    Endpoint errors and ground truth magnitudes of the valid pixels.
    :param pred: Predicted flow.
    :param gt: Ground truth flow.
    :param valid: Optional mask broadcastable to [B, h, w].
    :return: (errors, magnitudes), both one-dimensional over valid pixels.
    """
    pred = _as_b2hw(pred)
    gt = _as_b2hw(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f'Prediction shape {pred.shape} does not match ground truth {gt.shape}')

    diff = pred - gt
    errors = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
    magnitudes = np.sqrt(gt[:, 0] ** 2 + gt[:, 1] ** 2)

    mask = np.ones(errors.shape, dtype=bool)
    if valid is not None:
        mask = np.broadcast_to(np.asarray(valid) >= 0.5, errors.shape)
    if not mask.any():
        raise InvalidConfiguration('The validity mask selects no pixels')

    return errors[mask], magnitudes[mask]


def epe(pred: FlowLike, gt: FlowLike, valid: Optional[np.ndarray] = None) -> float:
    """
    Mean Euclidean endpoint error over valid pixels.
    """
    errors, _ = endpoint_errors(pred, gt, valid)
    return float(errors.mean())


def outlier_mask(errors: np.ndarray, magnitudes: np.ndarray) -> np.ndarray:
    """
    KITTI outliers: error above 3 px and above 5% of the ground truth magnitude.
    """
    return (errors > 3.0) & (errors > 0.05 * magnitudes)


def fl_all(pred: FlowLike, gt: FlowLike, valid: Optional[np.ndarray] = None) -> float:
    """
    Percentage of valid pixels that are outliers.
    """
    errors, magnitudes = endpoint_errors(pred, gt, valid)
    return float(outlier_mask(errors, magnitudes).mean() * 100.0)


def flow_metrics(pred: FlowLike, gt: FlowLike, valid: Optional[np.ndarray] = None) -> FlowMetrics:
    """
    EPE, Fl-all and the 1/3/5 px accuracies in one pass.
    """
    errors, magnitudes = endpoint_errors(pred, gt, valid)
    return FlowMetrics(
        epe=float(errors.mean()),
        fl_all=float(outlier_mask(errors, magnitudes).mean() * 100.0),
        px1=float((errors < 1.0).mean() * 100.0),
        px3=float((errors < 3.0).mean() * 100.0),
        px5=float((errors < 5.0).mean() * 100.0),
    )
