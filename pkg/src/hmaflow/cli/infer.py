from typing import Annotated, Optional
import typer

from hmaflow.etc.enums import AlignmentMode, SearchStrategy
from hmaflow.io.flo import read_flo, write_flo
from hmaflow.io.image import load_image, save_image
from hmaflow.io.visualize import visualize_flow
from hmaflow.io.weights import load_weights
from hmaflow.pipeline import estimate_flow
from .utils import CONSOLE, run_async, report_errors, build_model_config, RadiiOption, SearchStrategyOption, \
    AlignmentOption, NoCsaOption, NoPositionEmbeddingOption, NoHierarchicalMotionOption


@report_errors
@run_async
async def infer_command(image1: Annotated[
                            str,
                            typer.Option(
                                '--image1',
                                help='Path of the first frame (PNG or PPM).'
                            )
                        ],
                        image2: Annotated[
                            str,
                            typer.Option(
                                '--image2',
                                help='Path of the second frame (PNG or PPM).'
                            )
                        ],
                        weights: Annotated[
                            str,
                            typer.Option(
                                '--weights',
                                help='Weights file of the model.'
                            )
                        ],
                        out: Annotated[
                            str,
                            typer.Option(
                                '--out',
                                help='Destination .flo file.'
                            )
                        ],
                        viz: Annotated[
                            Optional[str],
                            typer.Option(
                                '--viz',
                                help='Optional destination of a colour-coded flow image.'
                            )
                        ] = None,
                        iters: Annotated[
                            Optional[int],
                            typer.Option(
                                '--iters',
                                min=1,
                                help='Refinement iterations; defaults to HMAFLOW_INFER_ITERS.'
                            )
                        ] = None,
                        warm_start: Annotated[
                            Optional[str],
                            typer.Option(
                                '--warm-start',
                                help='Full-resolution .flo of the previous pair used to initialise the flow.'
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
    model = await load_weights(weights, config)

    flow = estimate_flow(
        model,
        load_image(image1),
        load_image(image2),
        iters=iters,
        warm_start=read_flo(warm_start) if warm_start else None,
    )

    write_flo(out, flow)
    CONSOLE.print(f'[green]Wrote flow to {out}.[/green]')

    if viz:
        save_image(viz, visualize_flow(flow))
        CONSOLE.print(f'[green]Wrote flow visualisation to {viz}.[/green]')
