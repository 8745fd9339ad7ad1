import asyncio
import functools
import inspect
from typing import Annotated, Optional
import typer
from rich.console import Console

from hmaflow.etc.enums import AlignmentMode, SearchStrategy
from hmaflow.etc.errors import HmaFlowError
from hmaflow.io.synthetic import Motion
from hmaflow.model.config import ModelConfig


CONSOLE = Console()


def run_async(func):
    if inspect.iscoroutinefunction(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            return asyncio.run(func(*args, **kwargs))

        return wrapper

    return func


def report_errors(func):
    """
    Print package errors in red and exit with their code instead of a traceback.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HmaFlowError as e:
            CONSOLE.print(f'[red]Error: {e.message}[/red]')
            raise typer.Exit(code=e.exit_code) from e

    return wrapper


def parse_size(value: str) -> tuple[int, int]:
    """
    Parse `HxW`, e.g. `64x96`.
    """
    try:
        height, width = (int(part) for part in value.lower().split('x'))
    except ValueError as e:
        raise typer.BadParameter(f'Expected a size like 64x64, got {value!r}') from e
    return height, width


def parse_motion(value: str) -> Motion:
    """
    Parse `translate:DX,DY`, `rotate:DEGREES` or `zoom:SCALE`.
    """
    kind, _, args = value.partition(':')
    try:
        numbers = [float(part) for part in args.split(',')] if args else []
        if kind == 'translate' and len(numbers) == 2:
            return Motion.translate(*numbers)
        if kind == 'rotate' and len(numbers) == 1:
            return Motion.rotate(numbers[0])
        if kind == 'zoom' and len(numbers) == 1:
            return Motion.zoom(numbers[0])
    except ValueError as e:
        raise typer.BadParameter(f'Invalid motion {value!r}: {e}') from e
    raise typer.BadParameter(f'Expected translate:DX,DY, rotate:DEGREES or zoom:SCALE, got {value!r}')


def parse_radii(value: str) -> tuple[int, ...]:
    try:
        radii = tuple(int(part) for part in value.split(','))
    except ValueError as e:
        raise typer.BadParameter(f'Expected comma-separated integers, got {value!r}') from e
    if not radii or any(r <= 0 for r in radii):
        raise typer.BadParameter(f'Search radii must be positive, got {value!r}')
    return radii


RadiiOption = Annotated[
    Optional[str],
    typer.Option(
        '--radii',
        help='Comma-separated search radii of the multi-scale search, e.g. 4,6,8,10.',
    )
]
SearchStrategyOption = Annotated[
    SearchStrategy,
    typer.Option(
        '--search-strategy',
        help='How motion features are looked up from the cost volumes.',
    )
]
AlignmentOption = Annotated[
    AlignmentMode,
    typer.Option(
        '--alignment',
        help='Operator aligning the quarter-resolution motion volume.',
    )
]
NoCsaOption = Annotated[
    bool,
    typer.Option(
        '--no-csa',
        help='Disable correlation self-attention.',
    )
]
NoPositionEmbeddingOption = Annotated[
    bool,
    typer.Option(
        '--no-position-embedding',
        help='Disable the global position embedding of the attention block.',
    )
]
NoHierarchicalMotionOption = Annotated[
    bool,
    typer.Option(
        '--no-hierarchical-motion',
        help='Use the eighth-resolution motion volume only.',
    )
]


def build_model_config(radii: Optional[str],
                       search_strategy: SearchStrategy,
                       alignment: AlignmentMode,
                       no_csa: bool,
                       no_position_embedding: bool,
                       no_hierarchical_motion: bool,
                       seed: Optional[int] = None,
                       ) -> ModelConfig:
    """
    Build the architecture selected by the shared ablation flags.
    """
    options = {
        'search_strategy': search_strategy,
        'alignment': alignment,
        'use_csa': not no_csa,
        'use_position_embedding': not no_position_embedding,
        'hierarchical_motion': not no_hierarchical_motion,
    }
    if radii is not None:
        options['radii'] = parse_radii(radii)
    if seed is not None:
        options['seed'] = seed
    return ModelConfig(**options)
