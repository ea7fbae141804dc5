"""
Worker configuration shared by the numba kernels and the thread-pool stages
"""

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import Any, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
    jit_message = ""
except ModuleNotFoundError:
    numba = None
    prange = range
    NUMBA_AVAILABLE = False
    jit_message = "Numba not available, kernels run as plain Python loops."

    def njit(*args: Any, **kwargs: Any) -> Any:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func


_threads = 1


def default_threads() -> int:
    """Thread count from BHIL_THREADS, or 1"""
    value = os.getenv("BHIL_THREADS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        logger.warning(f"Ignoring non-integer BHIL_THREADS={value!r}")
        return 1


def configure_threads(n: int) -> int:
    """
    Set the worker count for every parallel stage.

    Args:
        n: Requested worker count (clamped to what numba allows)

    Returns:
        The worker count in effect
    """
    global _threads
    n = max(1, int(n))
    if NUMBA_AVAILABLE:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    else:
        logger.warning(jit_message)
    _threads = n
    logger.debug(f"Worker count set to {n}")
    return n


def get_threads() -> int:
    return _threads


def ordered_map(
    func: Callable[[T], R], items: Iterable[T], workers: int | None = None
) -> list[R]:
    """Map over items in a thread pool; results keep the input order."""
    items = list(items)
    workers = workers or _threads
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
