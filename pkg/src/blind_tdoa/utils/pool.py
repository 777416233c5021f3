from __future__ import annotations

__all__ = ('create_process_pool', 'map_in_process_pool')

import asyncio
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

# uvloop is Posix only
try:
    import uvloop
except ImportError:
    async_driver = asyncio
else:
    async_driver = uvloop


log = logging.getLogger(__name__)


def create_process_pool(jobs: int) -> ProcessPoolExecutor:
    return ProcessPoolExecutor(max_workers=min(os.process_cpu_count() or 1, jobs))


async def _gather_in_pool[T, R](
    func: Callable[[T], R],
    items: Sequence[T],
    jobs: int,
) -> list[R]:
    loop = asyncio.get_running_loop()
    executor = create_process_pool(jobs)

    try:
        futures = [loop.run_in_executor(executor, func, item) for item in items]
        return list(await asyncio.gather(*futures))
    except BrokenProcessPool:
        log.exception(f'Process pool broke while running {func.__name__}; retrying once.')
        executor.shutdown(wait=False, cancel_futures=True)
        executor = create_process_pool(jobs)
        futures = [loop.run_in_executor(executor, func, item) for item in items]
        return list(await asyncio.gather(*futures))
    finally:
        executor.shutdown()


def map_in_process_pool[T, R](
    func: Callable[[T], R],
    items: Sequence[T],
    *,
    jobs: int = 1,
) -> list[R]:
    """Apply ``func`` to every item, in a bounded process pool when ``jobs > 1``.

    Results come back in item order regardless of completion order, so any
    fold over them is deterministic. ``func`` and the items must pickle.
    """

    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return async_driver.run(_gather_in_pool(func, items, jobs))
