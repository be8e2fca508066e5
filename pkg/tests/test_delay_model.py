import numpy as np
import pytest

from routing_core.delay_model import (
    DelayModel,
    PriceVector,
    evaluate,
    link_delay,
    link_delay_grad,
    od_travel_costs,
    social_delay,
    total_cost,
)
from routing_core.errors import DimensionMismatchError, InfeasibleFlowError, InvalidPriceError, NegativeFlowError
from routing_core.network import FEASIBILITY_EPS, Link, PathFlow, enumerate_paths, is_feasible
from routing_core.network_loader import load_network
from tests.conftest import two_link_document


def test_link_delay_closed_form():
    link = Link(id="1", tail="A", head="B", a=1.0, gamma=2.0, beta=3, m=1.0, M=2.0)
    assert link_delay(link, 0.0, 0.0) == 1.0
    assert link_delay(link, 1.0, 2.0) == pytest.approx(1.0 + 2.0 * 8.0)
    grad_h, grad_a = link_delay_grad(link, 1.0, 2.0)
    assert grad_h == pytest.approx(2.0 * 3 * 4.0)
    assert grad_a == pytest.approx(2.0 * 3 * 4.0 / 2.0)


def test_negative_flow_is_rejected():
    link = Link(id="1", tail="A", head="B", a=1.0, gamma=1.0, beta=1, m=1.0, M=1.0)
    with pytest.raises(NegativeFlowError):
        link_delay(link, -1e-3, 0.0)
    with pytest.raises(NegativeFlowError):
        link_delay_grad(link, 0.0, -1.0)


def test_gradients_match_central_differences():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        m = rng.uniform(0.5, 2.0)
        link = Link(id="x", tail="A", head="B", a=rng.uniform(0.1, 10.0), gamma=rng.uniform(0.5, 3.0),
                    beta=int(rng.integers(1, 5)), m=m, M=m / rng.uniform(0.1, 1.0))
        fh, fa = rng.uniform(1.0, 10.0, 2)
        step = 1e-6 * max(1.0, fh, fa)
        numeric_h = (link_delay(link, fh + step, fa) - link_delay(link, fh - step, fa)) / (2 * step)
        numeric_a = (link_delay(link, fh, fa + step) - link_delay(link, fh, fa - step)) / (2 * step)
        grad_h, grad_a = link_delay_grad(link, fh, fa)
        assert grad_h == pytest.approx(numeric_h, rel=1e-6)
        assert grad_a == pytest.approx(numeric_a, rel=1e-6)


def test_gradient_ratio_is_mu():
    link = Link(id="1", tail="A", head="B", a=1.0, gamma=1.5, beta=2, m=0.7, M=2.1)
    grad_h, grad_a = link_delay_grad(link, 3.0, 1.0)
    assert grad_a / grad_h == pytest.approx(link.mu, rel=1e-14)


def test_vectorized_model_matches_scalar_functions(example1, example1_paths):
    model = DelayModel(example1, example1_paths)
    rng = np.random.default_rng(5)
    link_h = rng.uniform(0, 8, 4)
    link_a = rng.uniform(0, 8, 4)
    delays = model.link_delays(link_h, link_a)
    grad_h, grad_a = model.link_gradients(link_h, link_a)
    for index, link in enumerate(example1.links):
        assert delays[index] == pytest.approx(link_delay(link, link_h[index], link_a[index]), rel=1e-14)
        expected_h, expected_a = link_delay_grad(link, link_h[index], link_a[index])
        assert grad_h[index] == pytest.approx(expected_h, rel=1e-14)
        assert grad_a[index] == pytest.approx(expected_a, rel=1e-14)


def test_social_gradient_matches_finite_differences(example1, example1_paths):
    model = DelayModel(example1, example1_paths)
    rng = np.random.default_rng(9)
    fh = rng.uniform(0.5, 4.0, 4)
    fa = rng.uniform(0.5, 4.0, 4)
    grad_h, grad_a, value = model.social_gradient(fh, fa)
    assert value == pytest.approx(model.social_delay(fh, fa))
    step = 1e-6
    for index in range(4):
        bump = np.zeros(4)
        bump[index] = step
        numeric_h = (model.social_delay(fh + bump, fa) - model.social_delay(fh - bump, fa)) / (2 * step)
        numeric_a = (model.social_delay(fh, fa + bump) - model.social_delay(fh, fa - bump)) / (2 * step)
        assert grad_h[index] == pytest.approx(numeric_h, rel=1e-6)
        assert grad_a[index] == pytest.approx(numeric_a, rel=1e-6)


def test_example1_all_direct_flow(example1, example1_paths):
    # everyone on the one-link paths: link 1 carries AB, link 2 carries AC
    direct = PathFlow([7.5, 0.0, 0.0, 1.2], [4.5, 0.0, 0.0, 4.8])
    breakdown = evaluate(example1, example1_paths, direct, PriceVector.zeros(example1))
    np.testing.assert_allclose(breakdown.link_delay, [9.0 + 7.5 / 3 + 4.5 / 9, 3.0 + 2.4 + 4.8 / 1.5, 0.6, 0.6])
    expected = 12.0 * (9.0 + 2.5 + 0.5) + 6.0 * (3.0 + 2.4 + 3.2)
    assert breakdown.social_delay == pytest.approx(expected)
    assert social_delay(example1, example1_paths, direct, strict=True) == pytest.approx(expected)


def test_total_cost_adds_collected_prices(example1, example1_paths):
    flow = PathFlow.uniform(example1, example1_paths)
    tau = PriceVector([1.0, 2.0, 0.0, 0.5], [0.25, 0.5, 0.0, 0.125])
    breakdown = evaluate(example1, example1_paths, flow, tau)
    assert total_cost(example1, example1_paths, flow, tau) == pytest.approx(
        breakdown.social_delay + breakdown.collected_prices(tau))
    assert total_cost(example1, example1_paths, flow, PriceVector.zeros(example1)) == pytest.approx(
        breakdown.social_delay)


def test_od_travel_costs_take_cheapest_path(example1, example1_paths):
    flow = PathFlow.uniform(example1, example1_paths)
    tau = PriceVector.undifferentiated([0.0, 0.0, 0.0, 10.0])
    breakdown = evaluate(example1, example1_paths, flow, tau)
    costs = od_travel_costs(example1, example1_paths, flow, tau)
    assert costs["AB"][0] == pytest.approx(min(breakdown.path_cost_h[0], breakdown.path_cost_h[1]))
    assert costs["AC"][1] == pytest.approx(min(breakdown.path_cost_a[2], breakdown.path_cost_a[3]))


def test_strict_social_delay_rejects_infeasible(example1, example1_paths):
    with pytest.raises(InfeasibleFlowError):
        social_delay(example1, example1_paths, PathFlow.zeros(example1_paths), strict=True)


def test_price_vector_validation(example1, example1_paths):
    with pytest.raises(InvalidPriceError):
        PriceVector([1.0, -1.0], [0.0, 0.0])
    with pytest.raises(InvalidPriceError):
        PriceVector([np.inf], [0.0])
    with pytest.raises(ValueError):
        PriceVector([0.0], [np.nan])
    with pytest.raises(DimensionMismatchError):
        PriceVector([1.0, 2.0], [1.0])
    with pytest.raises(DimensionMismatchError):
        PriceVector.zeros(example1).path_prices(enumerate_two_link_paths())

    tau = PriceVector.undifferentiated([1.0, 2.0, 3.0, 4.0])
    assert tau.is_undifferentiated()
    assert tau.digest() == PriceVector.undifferentiated([1.0, 2.0, 3.0, 4.0]).digest()
    assert tau.digest() != PriceVector([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.5]).digest()


def enumerate_two_link_paths():
    link = {"a": 1.0, "gamma": 1.0, "beta": 1, "m": 1.0, "mu": 1.0}
    return enumerate_paths(load_network(two_link_document(link, link, 1.0, 0.0)))


def test_rounding_residue_reads_as_zero_flow(example1, example1_paths):
    uniform = PathFlow.uniform(example1, example1_paths)
    residue = PathFlow([7.5 + 1e-12, -1e-12, 0.6, 0.6], uniform.fa)
    clean = PathFlow([7.5 + 1e-12, 0.0, 0.6, 0.6], uniform.fa)
    assert is_feasible(example1, example1_paths, residue).feasible

    tau = PriceVector([1.0, 0.0, 0.5, 0.5], [1 / 3, 0.0, 1 / 6, 1 / 6])
    assert social_delay(example1, example1_paths, residue, strict=True) == \
        social_delay(example1, example1_paths, clean)
    assert total_cost(example1, example1_paths, residue, tau) == total_cost(example1, example1_paths, clean, tau)
    assert od_travel_costs(example1, example1_paths, residue, tau) == od_travel_costs(example1, example1_paths,
                                                                                      clean, tau)


def test_negative_flow_beyond_feasibility_eps_is_rejected(example1, example1_paths):
    uniform = PathFlow.uniform(example1, example1_paths)
    negative = PathFlow([7.5 + 10 * FEASIBILITY_EPS, -10 * FEASIBILITY_EPS, 0.6, 0.6], uniform.fa)
    with pytest.raises(NegativeFlowError):
        evaluate(example1, example1_paths, negative, PriceVector.zeros(example1))
