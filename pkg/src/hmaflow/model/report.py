"""
Result models written by the trainer, the evaluator and the self-test runner.
"""

from typing import List, Optional
from pydantic import Field, ConfigDict

from .base import JsonModel


class OverfitReport(JsonModel):
    """
    Summary of a desk-scale overfit run. The key set is fixed for CI parsing.
    """

    model_config = ConfigDict(extra='forbid')

    steps: int = Field(
        ...,
        description='Number of optimiser steps taken.',
    )
    final_loss: float = Field(
        ...,
        description='Sequence loss of the last step.',
    )
    final_epe: float = Field(
        ...,
        description='Endpoint error of the last prediction after training.',
    )
    per_iter_epe: List[float] = Field(
        default_factory=list,
        description='Endpoint error of every refinement iteration after training.',
    )


class FlowMetrics(JsonModel):
    """
    Flow accuracy metrics over the valid pixels of one or more pairs.
    """

    model_config = ConfigDict(extra='forbid')

    epe: float = Field(
        ...,
        description='Mean endpoint error in pixels.',
    )
    fl_all: float = Field(
        ...,
        description='Percentage of outliers: error > 3 px and > 5% of the ground truth magnitude.',
    )
    px1: float = Field(
        ...,
        description='Percentage of pixels with endpoint error below 1 px.',
    )
    px3: float = Field(
        ...,
        description='Percentage of pixels with endpoint error below 3 px.',
    )
    px5: float = Field(
        ...,
        description='Percentage of pixels with endpoint error below 5 px.',
    )


class PairEvaluation(JsonModel):
    """
    Metrics of one evaluated image pair.
    """

    model_config = ConfigDict(extra='forbid')

    index: int = Field(
        ...,
        description='Position of the pair in the pair list.',
    )
    image1: str = Field(
        ...,
        description='Path of the first frame.',
    )
    image2: str = Field(
        ...,
        description='Path of the second frame.',
    )
    ground_truth: str = Field(
        ...,
        description='Path of the ground truth .flo file.',
    )
    metrics: FlowMetrics = Field(
        ...,
        description='Metrics of this pair.',
    )
    flow_output: Optional[str] = Field(
        None,
        description='Path the predicted flow was written to, if requested.',
    )


class EvaluationReport(JsonModel):
    """
    Metrics of an evaluation run over a pair list.
    """

    model_config = ConfigDict(extra='forbid')

    iters: int = Field(
        ...,
        description='Refinement iterations used.',
    )
    pairs: List[PairEvaluation] = Field(
        default_factory=list,
        description='Per-pair results in pair list order.',
    )
    mean: FlowMetrics = Field(
        ...,
        description='Metrics averaged over pairs.',
    )


class CheckResult(JsonModel):
    """
    Outcome of one self-test check.
    """

    model_config = ConfigDict(extra='forbid')

    name: str = Field(
        ...,
        description='The registered check name.',
    )
    passed: bool = Field(
        ...,
        description='Whether the check passed.',
    )
    detail: str = Field(
        '',
        description='Measured value or failure message.',
    )
    seconds: float = Field(
        0.0,
        description='Wall time of the check.',
    )
