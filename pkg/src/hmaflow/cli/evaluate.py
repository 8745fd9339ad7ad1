from typing import Annotated, Optional
import typer
from rich.table import Table

from hmaflow.etc.enums import AlignmentMode, SearchStrategy
from hmaflow.io.weights import load_weights
from hmaflow.pipeline import evaluate_pairs, read_pairs_file
from .utils import CONSOLE, run_async, report_errors, build_model_config, RadiiOption, SearchStrategyOption, \
    AlignmentOption, NoCsaOption, NoPositionEmbeddingOption, NoHierarchicalMotionOption


@report_errors
@run_async
async def evaluate_command(pairs: Annotated[
                               str,
                               typer.Option(
                                   '--pairs',
                                   help='Pair list: one "image1 image2 ground_truth.flo" per line.'
                               )
                           ],
                           weights: Annotated[
                               str,
                               typer.Option(
                                   '--weights',
                                   help='Weights file of the model.'
                               )
                           ],
                           iters: Annotated[
                               Optional[int],
                               typer.Option(
                                   '--iters',
                                   min=1,
                                   help='Refinement iterations; defaults to HMAFLOW_INFER_ITERS.'
                               )
                           ] = None,
                           report: Annotated[
                               Optional[str],
                               typer.Option(
                                   '--report',
                                   help='Optional destination of the JSON report.'
                               )
                           ] = None,
                           flow_dir: Annotated[
                               Optional[str],
                               typer.Option(
                                   '--flow-dir',
                                   help='Optional directory for the predicted .flo files.'
                               )
                           ] = None,
                           radii: RadiiOption = None,
                           search_strategy: SearchStrategyOption = SearchStrategy.MULTI_SCALE,
                           alignment: AlignmentOption = AlignmentMode.CONV2X2,
                           no_csa: NoCsaOption = False,
                           no_position_embedding: NoPositionEmbeddingOption = False,
                           no_hierarchical_motion: NoHierarchicalMotionOption = False,
                           ):
    config = build_model_config(
        radii, search_strategy, alignment, no_csa, no_position_embedding, no_hierarchical_motion,
    )
    pair_list = read_pairs_file(pairs)
    model = await load_weights(weights, config)

    result = await evaluate_pairs(model, pair_list, iters=iters, flow_dir=flow_dir)

    table = Table(title=f'Evaluation ({result.iters} iterations)')
    table.add_column('Pair', justify='right')
    table.add_column('EPE', justify='right')
    table.add_column('Fl-all %', justify='right')
    table.add_column('1px %', justify='right')
    table.add_column('3px %', justify='right')
    table.add_column('5px %', justify='right')

    rows = [(str(p.index), p.metrics) for p in result.pairs] + [('mean', result.mean)]
    for label, m in rows:
        table.add_row(label, f'{m.epe:.4f}', f'{m.fl_all:.2f}', f'{m.px1:.2f}', f'{m.px3:.2f}', f'{m.px5:.2f}')
    CONSOLE.print(table)

    if report:
        await result.save_json(report)
        CONSOLE.print(f'[green]Wrote report to {report}.[/green]')
