from typing import Annotated, Optional
import typer

from hmaflow.etc.consts import CONFIG
from hmaflow.etc.enums import AlignmentMode, SearchStrategy
from hmaflow.io.weights import save_weights
from hmaflow.model.config import TrainingConfig
from hmaflow.pipeline import run_overfit
from hmaflow.pipeline.overfit import zero_flow_epe
from .utils import CONSOLE, run_async, report_errors, build_model_config, parse_motion, parse_size, \
    RadiiOption, SearchStrategyOption, AlignmentOption, NoCsaOption, NoPositionEmbeddingOption, \
    NoHierarchicalMotionOption


@report_errors
@run_async
async def overfit_command(size: Annotated[
                              str,
                              typer.Option(
                                  '--size',
                                  help='Size of the synthetic pair as HxW, both multiples of 8.'
                              )
                          ] = '64x64',
                          motion: Annotated[
                              str,
                              typer.Option(
                                  '--motion',
                                  help='Motion of the pair: translate:DX,DY, rotate:DEGREES or zoom:SCALE.'
                              )
                          ] = 'translate:5,3',
                          steps: Annotated[
                              int,
                              typer.Option(
                                  '--steps',
                                  min=1,
                                  help='Number of optimiser steps.'
                              )
                          ] = 500,
                          report: Annotated[
                              Optional[str],
                              typer.Option(
                                  '--report',
                                  help='Optional destination of the JSON report.'
                              )
                          ] = None,
                          lr: Annotated[
                              Optional[float],
                              typer.Option(
                                  '--lr',
                                  help='Peak learning rate; defaults to HMAFLOW_LEARNING_RATE.'
                              )
                          ] = None,
                          iters: Annotated[
                              Optional[int],
                              typer.Option(
                                  '--iters',
                                  min=1,
                                  help='Refinement iterations per step; defaults to HMAFLOW_TRAIN_ITERS.'
                              )
                          ] = None,
                          seed: Annotated[
                              Optional[int],
                              typer.Option(
                                  '--seed',
                                  help='Seed of the texture and the initialisation; defaults to HMAFLOW_SEED.'
                              )
                          ] = None,
                          save_weights_path: Annotated[
                              Optional[str],
                              typer.Option(
                                  '--save-weights',
                                  help='Optional destination of the trained weights.'
                              )
                          ] = None,
                          radii: RadiiOption = None,
                          search_strategy: SearchStrategyOption = SearchStrategy.MULTI_SCALE,
                          alignment: AlignmentOption = AlignmentMode.CONV2X2,
                          no_csa: NoCsaOption = False,
                          no_position_embedding: NoPositionEmbeddingOption = False,
                          no_hierarchical_motion: NoHierarchicalMotionOption = False,
                          ):
    pair_size = parse_size(size)
    pair_motion = parse_motion(motion)
    seed = CONFIG.seed if seed is None else seed

    training = TrainingConfig(
        steps=steps,
        seed=seed,
        **({'learning_rate': lr} if lr is not None else {}),
        **({'iters': iters} if iters is not None else {}),
    )
    model_config = build_model_config(
        radii, search_strategy, alignment, no_csa, no_position_embedding, no_hierarchical_motion, seed=seed,
    )

    result, model = run_overfit(pair_size, pair_motion, training, model_config)

    baseline = zero_flow_epe(pair_size, pair_motion, seed=seed)
    CONSOLE.print(
        f'[green]Finished {result.steps} steps: loss {result.final_loss:.4f}, '
        f'EPE {result.final_epe:.4f} px (zero-flow baseline {baseline:.4f} px).[/green]'
    )

    if report:
        await result.save_json(report)
        CONSOLE.print(f'[green]Wrote report to {report}.[/green]')
    if save_weights_path:
        await save_weights(model, save_weights_path)
        CONSOLE.print(f'[green]Wrote weights to {save_weights_path}.[/green]')
