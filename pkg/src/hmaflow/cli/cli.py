import sys
from typing import Annotated, Optional, Sequence
import typer

from hmaflow.etc.consts import CONFIG
from hmaflow.cli.evaluate import evaluate_command
from hmaflow.cli.infer import infer_command
from hmaflow.cli.overfit import overfit_command
from hmaflow.cli.selftest import selftest_command
from hmaflow.cli.utils import CONSOLE


def create_cli() -> typer.Typer:
    app = typer.Typer(
        help='HMAFlow optical flow CLI',
        invoke_without_command=True,
        no_args_is_help=True,
    )

    app.command(name='infer', help='Estimate the flow between two images.')(infer_command)
    app.command(name='overfit', help='Train a fresh model on one synthetic pair.')(overfit_command)
    app.command(name='eval', help='Evaluate a model over a list of image pairs.')(evaluate_command)
    app.command(name='selftest', help='Run the built-in verification checks.')(selftest_command)

    @app.callback()
    def main_callback(version: Annotated[
                          Optional[bool],
                          typer.Option(
                              '--version',
                              '-v',
                              help='Show the version of the HMAFlow CLI and exit.'
                          )
                      ] = None,
                      verbose: Annotated[
                          bool,
                          typer.Option(
                              '--verbose',
                              '-V',
                              help='Enable verbose output.'
                          )
                      ] = False,
                      ):
        if version:
            from hmaflow import __version__
            CONSOLE.print(f'HMAFlow CLI version: {__version__}')
            raise typer.Exit()

        if verbose:
            CONFIG.verbose_print = True

    return app


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI on an argument list and return the exit code instead of exiting.
    Usage errors print the usage text and return 2.
    """
    app = create_cli()
    try:
        app(args=list(sys.argv[1:] if argv is None else argv), prog_name='hmaflow-cli')
    except SystemExit as e:
        if e.code is None:
            return 0
        if isinstance(e.code, int):
            return e.code
        CONSOLE.print(f'[red]{e.code}[/red]')
        return 1

    return 0


def main():
    sys.exit(cli_main())


if __name__ == '__main__':
    main()
