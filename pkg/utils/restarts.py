"""
Runs independent solver restarts on a thread pool and returns them in restart order.
"""

import concurrent.futures
from typing import Callable, List, Sequence, TypeVar

import numpy as np

from config import settings_manager

T = TypeVar("T")


def resolve_threads(requested: int) -> int:
    """
    0 defers to TOLLGRID_THREADS (itself 0 = one worker per CPU).
    """
    if requested > 0:
        return requested
    return settings_manager.get_thread_count()


def restart_generators(seed: int, count: int) -> List[np.random.Generator]:
    """
    One independent generator per restart, derived from a single seed.
    """
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def run_restarts(task: Callable[[int], T], count: int, threads: int = 0) -> List[T]:
    """
    Evaluates task(0..count-1); results keep restart order whatever the worker count.
    """
    workers = min(resolve_threads(threads), count)
    if workers <= 1:
        return [task(index) for index in range(count)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(task, range(count)))


def best_index(values: Sequence[float]) -> int:
    """
    Lowest value wins; ties go to the lowest index.
    """
    best = 0
    for index, value in enumerate(values):
        if value < values[best]:
            best = index
    return best
