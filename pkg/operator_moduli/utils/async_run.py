import asyncio
import logging
import threading
import time
from collections.abc import Callable, Coroutine, Sequence
from typing import Any, TypeVar

from .progress_bar import ProgressBar

__all__ = ["run_seeded_tasks", "sidethread_event_loop_async_runner"]

logger = logging.getLogger("WorkQueueLogger")

T = TypeVar("T")


def sidethread_event_loop_async_runner(coroutine: Coroutine[Any, Any, T]) -> T:
    """Runs a coroutine on another thread, blocking until result complete.

    This creates a thread and event loop on that thread.  The coroutine
    is run on that event loop.  When the coroutine completes, it stops and closes
    the event loop and thread.  Used when the caller already sits inside a running
    event loop (e.g. a notebook) and cannot call `asyncio.run`.

    Args:
        coroutine (Coroutine): coroutine object, i.e. the result of calling an
            `async def` function.

    Returns:
        Any: The return value of the coroutine.
    """
    event_loop = asyncio.new_event_loop()

    def run_forever_safe(loop: asyncio.AbstractEventLoop) -> None:
        asyncio.set_event_loop(loop)
        # Runs until `loop.stop()` is called, which also ends the thread.
        loop.run_forever()

    thread = threading.Thread(target=run_forever_safe, args=(event_loop,))
    thread.start()

    future = asyncio.run_coroutine_threadsafe(coroutine, event_loop)
    result = future.result()
    event_loop.call_soon_threadsafe(event_loop.stop)
    while event_loop.is_running():
        time.sleep(0.01)
    thread.join()
    event_loop.close()
    return result


def run_seeded_tasks(
    task_fn: Callable[[int], T],
    seeds: Sequence[int],
    num_concurrent: int = 1,
    description: str = "tasks",
) -> list[T]:
    """Calls `task_fn(seed)` for every seed and returns the results in seed order.

    With `num_concurrent <= 1` the calls run serially on the calling thread.  Otherwise each
    call is dispatched with `asyncio.to_thread` behind a bounded semaphore; numpy releases the
    GIL inside LAPACK/FFT kernels so the workers overlap.  Every task derives its random stream
    from its own seed, so the returned list is identical for any worker count.

    Args:
        task_fn (Callable[[int], T]): CPU-bound work for one seed.
        seeds (Sequence[int]): seeds to run.
        num_concurrent (int): maximum number of tasks in flight.
        description (str): progress bar label.

    Returns:
        list[T]: results, aligned with `seeds`.
    """
    seeds = list(seeds)
    if num_concurrent <= 1 or len(seeds) <= 1:
        with ProgressBar() as p:
            return [task_fn(seed) for seed in p.track(seeds, description=description)]

    async def seeded_task(semaphore: asyncio.BoundedSemaphore, seed: int) -> T:
        "Wrap one task with the shared semaphore to bound concurrency."
        async with semaphore:
            return await asyncio.to_thread(task_fn, seed)

    async def run_concurrent() -> list[T]:
        semaphore = asyncio.BoundedSemaphore(num_concurrent)
        task_list = [asyncio.create_task(seeded_task(semaphore, seed)) for seed in seeds]
        # Completion order is arbitrary; only the progress display depends on it.
        with ProgressBar() as p:
            for task in p.track(
                asyncio.as_completed(task_list), description=description, total=len(task_list)
            ):
                await task
        return [task.result() for task in task_list]

    logger.info(f"Running {len(seeds)} {description} with {num_concurrent} workers")
    try:
        loop = asyncio.get_running_loop()
    except RuntimeError:  # no event loop in this thread
        loop = None
    if loop and loop.is_running():
        return sidethread_event_loop_async_runner(run_concurrent())
    return asyncio.run(run_concurrent())
