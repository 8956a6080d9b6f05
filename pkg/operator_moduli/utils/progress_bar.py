import sys
import threading

from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    ProgressColumn,
    SpinnerColumn,
    Task,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)
from rich.text import Text

__all__ = [
    "BestValueColumn",
    "IndeterminateProgressBar",
    "ProgressBar",
    "SearchProgressBar",
    "quiet_progress",
]

# Set by the CLI for `--quiet`; bars are also hidden when stderr is not a terminal.
quiet_progress = threading.Event()


def _hidden() -> bool:
    return quiet_progress.is_set() or not sys.stderr.isatty()


class BestValueColumn(ProgressColumn):
    "Renders the incumbent objective value stored in the task field `best`."

    def render(self, task: Task) -> Text:
        best = task.fields.get("best")
        if best is None:
            return Text("best -", style="progress.data.speed")
        return Text(f"best {best:.6g}", style="progress.data.speed")


class ProgressBar(Progress):
    """Progress Bar for sweeps with a known number of instances.
    Example Usage:
    ```python
    with ProgressBar() as p:
        for seed in p.track(range(200), description="doi-check"):
            ...
    ```
    """

    def __init__(self, *args, **kwargs) -> None:
        kwargs.setdefault("disable", _hidden())
        super().__init__(*args, **kwargs)
        self.columns = (
            TextColumn("[progress.description]{task.description}"),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            BarColumn(),
            MofNCompleteColumn(),
            TextColumn("•"),
            TimeElapsedColumn(),
            TextColumn("•"),
            TimeRemainingColumn(),
        )


class SearchProgressBar(Progress):
    """Progress Bar for budgeted searches; shows the incumbent value.
    Example Usage:
    ```python
    with SearchProgressBar() as p:
        task = p.add_task("search C", total=budget, best=None)
        for step in range(budget):
            ...
            p.update(task, advance=1, best=incumbent)
    ```
    """

    def __init__(self, *args, **kwargs) -> None:
        kwargs.setdefault("disable", _hidden())
        super().__init__(*args, **kwargs)
        self.columns = (
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TextColumn("•"),
            BestValueColumn(),
            TextColumn("•"),
            TimeElapsedColumn(),
        )


class IndeterminateProgressBar(Progress):
    """Progress Bar for tasks with no clearly defined endpoint (quadratures, FFT grids).
    Example Usage:
    ```python
    with IndeterminateProgressBar() as p:
        p.add_task("psi constant", total=None)
        ...
    ```
    """

    def __init__(self, *args, **kwargs) -> None:
        kwargs.setdefault("disable", _hidden())
        super().__init__(*args, **kwargs)
        self.columns = (
            TextColumn("[progress.description]{task.description}"),
            SpinnerColumn(),
            TimeElapsedColumn(),
        )
