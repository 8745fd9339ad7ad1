from typing import Annotated, Optional
import typer
from rich.table import Table

from hmaflow.selftest import CHECKS, run_checks
from .utils import CONSOLE, report_errors


@report_errors
def selftest_command(only: Annotated[
                         Optional[list[str]],
                         typer.Option(
                             '--only',
                             help=f'Run only the named check; repeatable. Checks: {", ".join(CHECKS)}.'
                         )
                     ] = None,
                     ):
    results = run_checks(only)

    table = Table(title='Self-test')
    table.add_column('Check')
    table.add_column('Result')
    table.add_column('Seconds', justify='right')
    table.add_column('Detail')
    for result in results:
        table.add_row(
            result.name,
            '[green]PASS[/green]' if result.passed else '[red]FAIL[/red]',
            f'{result.seconds:.2f}',
            result.detail,
        )
    CONSOLE.print(table)

    failed = [r.name for r in results if not r.passed]
    if failed:
        CONSOLE.print(f'[red]{len(failed)} of {len(results)} checks failed: {", ".join(failed)}[/red]')
        raise typer.Exit(code=1)
    CONSOLE.print(f'[green]All {len(results)} checks passed.[/green]')
