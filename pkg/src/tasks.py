import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from src.core.config import settings

logger = logging.getLogger("wbary.worker")

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else settings.THREADS, else one worker per logical core."""
    if threads is None:
        threads = settings.THREADS
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def run_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None,
                label: str = "task") -> List[R]:
    """
    Apply fn to every item on a thread pool and return the results in input order.
    Reductions over the results therefore always sum in the same order, whatever the
    thread count. threads=1 runs inline; the first exception raised by fn propagates.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]

    logger.debug(f"[Worker] {len(items)} {label}(s) on {workers} threads")
    # numpy / POT release the GIL inside their kernels, so threads give real overlap
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="wbary") as pool:
        return list(pool.map(fn, items))
