import numpy as np
import pytest

from pricing_verse.Marginal_Pricing.pipeline import price_pipeline
from pricing_verse.Marginal_Pricing.pricing import (
    check_price_structure,
    load_price_vector,
    marginal_prices,
    price_vector_frame,
)
from routing_core.delay_model import PriceVector
from routing_core.errors import DimensionMismatchError, InfeasibleFlowError, NetworkParseError
from routing_core.network import PathFlow, enumerate_paths
from routing_core.network_loader import load_network
from solver_model.solver_options import EqOptions, PipelineOptions, SoOptions
from tests.conftest import EXAMPLE1_OPTIMUM, two_link_document

DIRECT_FLOW = PathFlow([7.5, 0.0, 0.0, 1.2], [4.5, 0.0, 0.0, 4.8])


@pytest.fixture(scope="module")
def example1_pipeline(example1, example1_paths):
    return price_pipeline(example1, PipelineOptions(), example1_paths)


def test_prices_vanish_without_flow():
    link = {"a": 1.0, "gamma": 2.0, "beta": 3, "m": 1.0, "mu": 0.5}
    net = load_network(two_link_document(link, link, 0.0, 0.0))
    paths = enumerate_paths(net)
    tau = marginal_prices(net, paths, PathFlow.zeros(paths))
    np.testing.assert_array_equal(tau.tau_h, [0.0, 0.0])
    np.testing.assert_array_equal(tau.tau_a, [0.0, 0.0])


def test_linear_delay_closed_form(example1, example1_paths):
    # beta = 1: tau_h = F * gamma / m and tau_a = F * gamma / M, F = (12, 6, 0, 0)
    tau = marginal_prices(example1, example1_paths, DIRECT_FLOW)
    np.testing.assert_allclose(tau.tau_h, [4.0, 12.0, 0.0, 0.0], rtol=1e-14)
    np.testing.assert_allclose(tau.tau_a, [12.0 / 9.0, 4.0, 0.0, 0.0], rtol=1e-14)


def test_single_link_prices(single_link, single_link_paths):
    tau = marginal_prices(single_link, single_link_paths, PathFlow([1.0], [2.0]))
    assert tau.tau_h[0] == pytest.approx(3.0)
    assert tau.tau_a[0] == pytest.approx(1.5)


def test_prices_need_feasible_flow(example1, example1_paths):
    with pytest.raises(InfeasibleFlowError):
        marginal_prices(example1, example1_paths, PathFlow.zeros(example1_paths))


def test_price_structure(example1, example1_paths, networks_dir):
    tau = marginal_prices(example1, example1_paths, PathFlow.uniform(example1, example1_paths))
    report = check_price_structure(example1, tau)
    assert report.applicable
    assert report.status == "PASS"
    assert report.max_deviation <= 1e-10
    assert report.mu == pytest.approx(1 / 3)

    flat = PriceVector(tau.tau_h, tau.tau_h)
    assert check_price_structure(example1, flat).status == "FAIL"
    assert check_price_structure(example1, flat).max_deviation == pytest.approx(2.0 / 3.0)

    hetero = load_network(networks_dir / "example1_hetero.net")
    hetero_tau = marginal_prices(hetero, enumerate_paths(hetero), DIRECT_FLOW)
    assert check_price_structure(hetero, hetero_tau).status == "INAPPLICABLE"


def test_price_file_round_trip(tmp_path, example1, example1_paths):
    tau = marginal_prices(example1, example1_paths, PathFlow.uniform(example1, example1_paths))
    target = tmp_path / "prices.csv"
    price_vector_frame(example1, tau).iloc[::-1].to_csv(target, index=False, float_format="%.17g")
    loaded = load_price_vector(target, example1)
    np.testing.assert_allclose(loaded.tau_h, tau.tau_h, rtol=1e-15)
    np.testing.assert_allclose(loaded.tau_a, tau.tau_a, rtol=1e-15)


def test_price_file_errors(tmp_path, example1):
    missing_link = tmp_path / "missing_link.csv"
    missing_link.write_text("link_id,tau_h,tau_a\n1,0,0\n2,0,0\n3,0,0\n", encoding="utf-8")
    with pytest.raises(DimensionMismatchError):
        load_price_vector(missing_link, example1)

    missing_column = tmp_path / "missing_column.csv"
    missing_column.write_text("link_id,tau_h\n1,0\n2,0\n3,0\n4,0\n", encoding="utf-8")
    with pytest.raises(NetworkParseError):
        load_price_vector(missing_column, example1)

    with pytest.raises(NetworkParseError):
        load_price_vector(tmp_path / "absent.csv", example1)


def test_example1_pipeline(example1_pipeline):
    summary = example1_pipeline.summary
    assert summary.homogeneous
    assert summary.price_structure == "PASS"
    assert summary.witness_gap <= 1e-5
    assert summary.converged == summary.restarts == 16
    assert summary.spread <= 1e-3
    for result in example1_pipeline.equilibria:
        assert result.social_delay == pytest.approx(EXAMPLE1_OPTIMUM, rel=5e-3)
        assert result.social_delay == pytest.approx(summary.optimum, rel=1e-3)
    assert summary.passed
    assert summary.to_dict()["passed"] is True
    assert summary.lines()[-1].endswith("PASS")


def test_pipeline_prices_match_optimum(example1, example1_paths, example1_pipeline):
    expected = marginal_prices(example1, example1_paths, example1_pipeline.fstar.flow)
    np.testing.assert_array_equal(example1_pipeline.tau.tau_h, expected.tau_h)
    assert {result.tau_digest for result in example1_pipeline.equilibria} == {expected.digest()}


def test_single_link_pipeline(single_link, single_link_paths):
    result = price_pipeline(single_link, PipelineOptions(so=SoOptions(restarts=1), ue=EqOptions(restarts=2)),
                            single_link_paths)
    assert result.summary.optimum == pytest.approx(6.0)
    assert result.summary.min_social_delay == pytest.approx(6.0)
    assert result.summary.passed


def test_heterogeneous_pipeline_keeps_optimal_witness(networks_dir):
    hetero = load_network(networks_dir / "example1_hetero.net")
    options = PipelineOptions(so=SoOptions(restarts=4), ue=EqOptions(restarts=4))
    result = price_pipeline(hetero, options)
    assert not result.summary.homogeneous
    assert result.summary.price_structure == "INAPPLICABLE"
    assert result.summary.witness_passed
    assert result.summary.at_optimum >= 1
    assert result.summary.passed
