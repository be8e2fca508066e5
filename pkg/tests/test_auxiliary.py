from dataclasses import replace

import numpy as np
import pytest

from pricing_verse.Auxiliary_Game.auxiliary import (
    build_auxiliary,
    certify_social_delay_uniqueness,
    map_to_auxiliary,
)
from pricing_verse.Marginal_Pricing.pipeline import price_pipeline
from routing_core.delay_model import PriceVector, evaluate
from routing_core.errors import HeterogeneousNetworkError
from routing_core.network import PathFlow, enumerate_paths
from routing_core.network_loader import load_network
from solver_model.solver_options import EqOptions, PipelineOptions, SoOptions


@pytest.fixture(scope="module")
def priced_example1(example1, example1_paths):
    options = PipelineOptions(so=SoOptions(restarts=2), ue=EqOptions(restarts=4, tol=1e-9))
    return price_pipeline(example1, options, example1_paths)


def test_unit_mu_is_identity(networks_dir):
    net = load_network(networks_dir / "example1_mu1.net")
    aux = build_auxiliary(net, PriceVector.zeros(net))
    assert aux.mu == 1.0
    assert aux.network == net


def test_example1_auxiliary_demands(example1):
    aux = build_auxiliary(example1, PriceVector.zeros(example1))
    np.testing.assert_allclose(aux.demand_a, [1.5, 1.6])
    np.testing.assert_array_equal(aux.demand_h, example1.demand_h)
    assert all(link.M == link.m for link in aux.network.links)
    assert [link.id for link in aux.network.links] == [link.id for link in example1.links]


def test_heterogeneous_network_has_no_auxiliary_game(networks_dir):
    hetero = load_network(networks_dir / "example1_hetero.net")
    with pytest.raises(HeterogeneousNetworkError):
        build_auxiliary(hetero, PriceVector.zeros(hetero))


def test_mapping_preserves_delays_and_costs(example1, example1_paths):
    tau = PriceVector([1.0, 3.0, 0.3, 0.6], [1 / 3, 1.0, 0.1, 0.2])
    aux = build_auxiliary(example1, tau)
    rng = np.random.default_rng(11)
    for _ in range(100):
        flow = PathFlow(rng.uniform(0, 10, 4), rng.uniform(0, 10, 4))
        mapped = map_to_auxiliary(flow, aux.mu)
        original = evaluate(example1, example1_paths, flow, tau)
        delays = aux.link_delays(example1_paths, mapped)
        assert np.all(np.abs(delays - original.link_delay) <= 1e-12 * (1 + np.abs(original.link_delay)))

        auxiliary = evaluate(aux.network, example1_paths, mapped, tau)
        np.testing.assert_allclose(auxiliary.path_cost_h, original.path_cost_h, rtol=1e-12)
        np.testing.assert_allclose(auxiliary.path_cost_a, original.path_cost_a, rtol=1e-12)
        cost_h, cost_a = aux.link_costs(example1_paths, mapped)
        np.testing.assert_allclose(cost_h - cost_a, tau.tau_h - tau.tau_a, atol=1e-12)


def test_certificate_passes_on_marginal_prices(example1, example1_paths, priced_example1):
    report = certify_social_delay_uniqueness(example1, example1_paths, priced_example1.tau,
                                             priced_example1.equilibria)
    assert report.passed, report.lines()
    assert report.status == "PASS"
    assert report.equilibria == 4
    assert report.mu == pytest.approx(1 / 3)
    assert [check.name for check in report.checks] == [
        "auxiliary_gap", "scaled_link_flow_spread", "social_delay_spread", "cost_decomposition"]
    frame = report.to_frame()
    assert list(frame.columns) == ["check", "residual", "threshold", "passed"]
    assert frame["passed"].all()


def test_single_equilibrium_certificate_is_vacuous(example1, example1_paths, priced_example1):
    report = certify_social_delay_uniqueness(example1, example1_paths, priced_example1.tau,
                                             priced_example1.equilibria[:1])
    assert report.passed
    assert report.checks[1].residual == 0.0
    assert report.checks[2].residual == 0.0


def test_certificate_rejects_mixed_prices(example1, example1_paths, priced_example1):
    report = certify_social_delay_uniqueness(example1, example1_paths, PriceVector.zeros(example1),
                                             priced_example1.equilibria)
    assert not report.passed
    assert "different price vector" in report.reason


def test_certificate_without_converged_equilibria(example1, example1_paths, priced_example1):
    stalled = [replace(result, converged=False) for result in priced_example1.equilibria]
    report = certify_social_delay_uniqueness(example1, example1_paths, priced_example1.tau, stalled)
    assert not report.passed
    assert report.reason == "no converged equilibria"


def test_certificate_is_inapplicable_on_heterogeneous_network(networks_dir):
    hetero = load_network(networks_dir / "example1_hetero.net")
    paths = enumerate_paths(hetero)
    result = price_pipeline(hetero, PipelineOptions(so=SoOptions(restarts=1), ue=EqOptions(restarts=2)), paths)
    report = certify_social_delay_uniqueness(hetero, paths, result.tau, result.equilibria)
    assert not report.passed
    assert "heterogeneous" in report.reason
