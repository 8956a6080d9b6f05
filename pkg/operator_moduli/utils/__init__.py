from .async_run import *
from .progress_bar import *
from .random_state import *

__all__ = [
    "BestValueColumn",
    "IndeterminateProgressBar",
    "ProgressBar",
    "SearchProgressBar",
    "quiet_progress",
    "rng",
    "run_seeded_tasks",
    "sidethread_event_loop_async_runner",
]
