import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def thread_cap(requested: Optional[int] = None) -> int:
    """Worker count from the argument or COMPET_CTL_THREADS (0 = auto)"""
    if requested is None:
        try:
            requested = int(os.getenv("COMPET_CTL_THREADS", "0"))
        except ValueError:
            logger.warning("Ignoring non-integer COMPET_CTL_THREADS")
            requested = 0
    if requested <= 0:
        return os.cpu_count() or 1
    return requested


def parallel_map(func: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """
    Map func over items, results in input order regardless of thread count
    """
    items = list(items)
    workers = min(thread_cap(max_workers), max(len(items), 1))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
