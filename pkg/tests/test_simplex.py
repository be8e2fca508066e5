import numpy as np
import pytest
from scipy.optimize import minimize

from utils.simplex import project_grouped, project_simplex, random_grouped


def projection_oracle(values: np.ndarray, total: float) -> np.ndarray:
    result = minimize(
        lambda x: 0.5 * np.sum((x - values) ** 2),
        np.full(values.size, total / values.size),
        jac=lambda x: x - values,
        bounds=[(0.0, None)] * values.size,
        constraints=[{"type": "eq", "fun": lambda x: np.sum(x) - total, "jac": lambda x: np.ones_like(x)}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return result.x


def test_projection_matches_quadratic_program():
    rng = np.random.default_rng(1)
    for size in (2, 3, 5):
        for _ in range(20):
            values = rng.normal(0.0, 3.0, size)
            total = rng.uniform(0.1, 5.0)
            projected = project_simplex(values, total)
            assert projected.sum() == pytest.approx(total, abs=1e-12)
            assert projected.min() >= 0.0
            np.testing.assert_allclose(projected, projection_oracle(values, total), atol=1e-6)


def test_projection_edge_cases():
    np.testing.assert_array_equal(project_simplex(np.array([3.0, -1.0]), 0.0), [0.0, 0.0])
    np.testing.assert_array_equal(project_simplex(np.array([-7.0]), 2.5), [2.5])
    np.testing.assert_allclose(project_simplex(np.array([0.2, 0.3]), 0.5), [0.2, 0.3])


def test_grouped_projection_and_sampling():
    groups = (slice(0, 2), slice(2, 5))
    totals = np.array([1.0, 4.0])
    projected = project_grouped(np.array([5.0, 5.0, -1.0, 0.0, 1.0]), groups, totals)
    np.testing.assert_allclose(projected[groups[0]], [0.5, 0.5])
    assert projected[groups[1]].sum() == pytest.approx(4.0)

    sample = random_grouped(groups, totals, np.random.default_rng(0), 5)
    assert sample[groups[0]].sum() == pytest.approx(1.0)
    assert sample[groups[1]].sum() == pytest.approx(4.0)
    assert sample.min() >= 0.0
