"""
Provides utilities for extracting and logging iteration statistics from solver results.
"""

import time
from dataclasses import dataclass, field

from utils.logger import log


@dataclass
class SolveStats:
    """
        Aggregated run statistics of one solver call (all restarts).
    """
    solver: str
    restarts: int = 0
    converged: int = 0
    iterations: int = 0
    best_value: float = float("nan")
    elapsed: float = 0.0
    started_at: float = field(default_factory=time.perf_counter)

    def stop(self) -> "SolveStats":
        self.elapsed = time.perf_counter() - self.started_at
        return self


def extract_iteration_count(result) -> int:
    """
        Extracts the iteration count from a solver result, 0 when the result carries none.
    """

    if result is not None and hasattr(result, "iterations"):
        return int(result.iterations)

    log.debug("The result is empty or missing the 'iterations' attribute.")
    return 0


def collect_restart_stats(stats: SolveStats, results) -> SolveStats:
    """
        Folds per-restart results into the running statistics.
    """

    for result in results:
        stats.restarts += 1
        stats.iterations += extract_iteration_count(result)
        if getattr(result, "converged", False):
            stats.converged += 1
    return stats


def log_solve_stats(stats: SolveStats) -> SolveStats:
    """
        Logs the restart, convergence and iteration totals of a solver call.
    """

    log.info(
        "[%s] restarts=%d converged=%d iterations=%d best=%.10g elapsed=%.3fs",
        stats.solver, stats.restarts, stats.converged, stats.iterations, stats.best_value, stats.elapsed,
    )
    if stats.converged < stats.restarts:
        log.warning("[%s] %d of %d restarts did not converge", stats.solver,
                    stats.restarts - stats.converged, stats.restarts)
    return stats
