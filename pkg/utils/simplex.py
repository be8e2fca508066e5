"""
Euclidean projection onto scaled simplices {x >= 0, sum(x) = total}.

Uses the sort-based algorithm: sort descending, find the largest k whose
running threshold stays below the k-th entry, shift and clip.
"""

from typing import Sequence

import numpy as np


def project_simplex(values: np.ndarray, total: float) -> np.ndarray:
    """
    Projects ``values`` onto the simplex of nonnegative vectors summing to ``total``.
    """
    values = np.asarray(values, dtype=float)
    if total <= 0.0:
        return np.zeros_like(values)
    if values.size == 1:
        return np.array([total], dtype=float)
    u = np.sort(values)[::-1]
    thresholds = (np.cumsum(u) - total) / np.arange(1, values.size + 1)
    k = np.nonzero(thresholds < u)[0][-1]
    return np.maximum(values - thresholds[k], 0.0)


def project_grouped(values: np.ndarray, groups: Sequence[slice], totals: np.ndarray) -> np.ndarray:
    """
    Projects each slice of ``values`` onto its own scaled simplex.
    """
    projected = np.empty_like(values, dtype=float)
    for group, total in zip(groups, totals):
        projected[group] = project_simplex(values[group], float(total))
    return projected


def random_grouped(groups: Sequence[slice], totals: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Draws a point uniformly (Dirichlet(1)) from each group's scaled simplex.
    """
    sample = np.zeros(size)
    for group, total in zip(groups, totals):
        sample[group] = rng.dirichlet(np.ones(group.stop - group.start)) * float(total)
    return sample
