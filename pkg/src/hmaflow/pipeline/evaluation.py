"""
Evaluation of a model over a list of image pairs with ground truth flow.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional
from pydantic import BaseModel, ConfigDict, Field

from hmaflow.etc.consts import CONFIG, LOGGER
from hmaflow.etc.errors import FilesNotFound, InvalidConfiguration
from hmaflow.etc.utils import schedule_tasks
from hmaflow.io.flo import read_flo, write_flo
from hmaflow.io.image import load_image
from hmaflow.model.flow import FlowField
from hmaflow.model.report import EvaluationReport, FlowMetrics, PairEvaluation
from hmaflow.network import HmaFlow
from hmaflow.supervision import flow_metrics
from .inference import estimate_flow


class EvaluationPair(BaseModel):
    """
    One line of a pair list: two frames and their ground truth.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    index: int = Field(
        ...,
        ge=0,
        description='Position in the pair list.',
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


def read_pairs_file(path: str | os.PathLike) -> list[EvaluationPair]:
    """
    Parse a pair list. Each non-empty line holds `image1 image2 ground_truth.flo`; relative
    paths are resolved against the list's directory and `#` starts a comment.
    """
    if not os.path.isfile(path):
        raise FilesNotFound(f'Pair list not found: {path}')

    base = os.path.dirname(os.path.abspath(path))
    pairs = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            fields = line.split('#', 1)[0].split()
            if not fields:
                continue
            if len(fields) != 3:
                raise InvalidConfiguration(
                    f'{path}:{line_no}: expected "image1 image2 flow.flo", got {len(fields)} fields'
                )
            image1, image2, gt = (os.path.join(base, p) for p in fields)
            pairs.append(EvaluationPair(index=len(pairs), image1=image1, image2=image2, ground_truth=gt))

    if not pairs:
        raise InvalidConfiguration(f'Pair list {path} contains no pairs')
    return pairs


def evaluate_pair(model: HmaFlow, pair: EvaluationPair, iters: int) -> tuple[EvaluationPair, FlowField, FlowMetrics]:
    """
    Run the model on one pair and score the prediction.
    """
    image1 = load_image(pair.image1)
    image2 = load_image(pair.image2)
    gt = read_flo(pair.ground_truth)

    flow = estimate_flow(model, image1, image2, iters=iters)
    return pair, flow, flow_metrics(flow, gt)


def mean_metrics(metrics: list[FlowMetrics]) -> FlowMetrics:
    """
    Unweighted mean of per-pair metrics.
    """
    count = len(metrics)
    return FlowMetrics(**{
        key: sum(getattr(m, key) for m in metrics) / count
        for key in FlowMetrics.model_fields
    })


async def evaluate_pairs(model: HmaFlow,
                         pairs: list[EvaluationPair],
                         iters: Optional[int] = None,
                         flow_dir: Optional[str | os.PathLike] = None,
                         ) -> EvaluationReport:
    """
    Evaluate every pair in a worker pool of `CONFIG.threads` threads. Weights are shared
    read-only; each worker owns its activations. Predicted flows are written from the
    event loop, one at a time, when `flow_dir` is given.
    :param model: The flow model.
    :param pairs: Pairs to evaluate.
    :param iters: Refinement iterations; defaults to the configured inference count.
    :param flow_dir: Optional directory for predicted `<index>.flo` files.
    :return: The report, pairs in list order.
    """
    if not pairs:
        raise InvalidConfiguration('No pairs to evaluate')
    iters = CONFIG.infer_iters if iters is None else iters
    model.eval()

    results: list[PairEvaluation] = []
    with ThreadPoolExecutor(max_workers=CONFIG.threads) as executor:
        async for pair, flow, metrics in schedule_tasks(
            executor,
            lambda p: evaluate_pair(model, p, iters),
            pairs,
            max_concurrency=CONFIG.threads,
            description='Evaluating pairs...',
            total=len(pairs),
        ):
            output = None
            if flow_dir is not None:
                output = os.path.join(flow_dir, f'{pair.index:06d}.flo')
                write_flo(output, flow)

            LOGGER.debug('Pair %d: EPE %.4f, Fl-all %.2f%%', pair.index, metrics.epe, metrics.fl_all)
            results.append(PairEvaluation(
                index=pair.index,
                image1=pair.image1,
                image2=pair.image2,
                ground_truth=pair.ground_truth,
                metrics=metrics,
                flow_output=output,
            ))

    results.sort(key=lambda r: r.index)
    return EvaluationReport(
        iters=iters,
        pairs=results,
        mean=mean_metrics([r.metrics for r in results]),
    )
