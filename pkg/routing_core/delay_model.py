"""
Link and path delays, class costs, social delay and total cost of the priced
two-class routing game.

Link delay: e(fh, fa) = a + gamma * (fh/m + fa/M) ** beta, beta a positive integer.
Path delay is additive over links; a class pays delay plus its summed link prices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from routing_core.errors import DimensionMismatchError, InvalidPriceError, NegativeFlowError
from routing_core.network import (
    FEASIBILITY_EPS,
    Link,
    LinkFlow,
    Network,
    PathFlow,
    PathSet,
    aggregate,
    check_dimensions,
    require_feasible,
)


def _int_power(x: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """
    Raises x to nonnegative integer exponents by repeated multiplication.
    """
    result = np.ones_like(x, dtype=float)
    for step in range(int(np.max(exponent, initial=0))):
        result = np.where(exponent > step, result * x, result)
    return result


def _scalar_power(x: float, exponent: int) -> float:
    result = 1.0
    for _ in range(exponent):
        result *= x
    return result


@dataclass(frozen=True, eq=False)
class PriceVector:
    """
    Per-link prices for human-driven (tau_h) and autonomous (tau_a) vehicles.
    """
    tau_h: np.ndarray
    tau_a: np.ndarray

    def __post_init__(self):
        tau_h = np.array(self.tau_h, dtype=float)
        tau_a = np.array(self.tau_a, dtype=float)
        if tau_h.ndim != 1 or tau_h.shape != tau_a.shape:
            raise DimensionMismatchError(f"price shapes differ or are not vectors: {tau_h.shape} vs {tau_a.shape}")
        if not (np.all(np.isfinite(tau_h)) and np.all(np.isfinite(tau_a))):
            raise InvalidPriceError("prices must be finite")
        if np.any(tau_h < 0) or np.any(tau_a < 0):
            raise InvalidPriceError("prices must be nonnegative")
        tau_h.setflags(write=False)
        tau_a.setflags(write=False)
        object.__setattr__(self, "tau_h", tau_h)
        object.__setattr__(self, "tau_a", tau_a)

    def __len__(self) -> int:
        return self.tau_h.size

    @classmethod
    def zeros(cls, net: Network) -> "PriceVector":
        return cls(np.zeros(len(net.links)), np.zeros(len(net.links)))

    @classmethod
    def undifferentiated(cls, values) -> "PriceVector":
        """
        Same price for both classes on every link.
        """
        values = np.array(values, dtype=float)
        return cls(values, values.copy())

    def is_undifferentiated(self) -> bool:
        return bool(np.array_equal(self.tau_h, self.tau_a))

    def path_prices(self, paths: PathSet) -> Tuple[np.ndarray, np.ndarray]:
        if len(self) != len(paths.link_ids):
            raise DimensionMismatchError(f"price vector has {len(self)} links, network has {len(paths.link_ids)}")
        return paths.incidence.T @ self.tau_h, paths.incidence.T @ self.tau_a

    def digest(self) -> str:
        """
        Content hash used to tell price vectors apart.
        """
        hasher = hashlib.sha256()
        hasher.update(np.ascontiguousarray(self.tau_h).tobytes())
        hasher.update(np.ascontiguousarray(self.tau_a).tobytes())
        return hasher.hexdigest()


def _check_flows(fh: float, fa: float) -> None:
    if fh < 0 or fa < 0:
        raise NegativeFlowError(f"link flows must be nonnegative, got fh={fh}, fa={fa}")


def link_delay(link: Link, fh: float, fa: float) -> float:
    """
    e(fh, fa) = a + gamma * (fh/m + fa/M) ** beta.
    """
    _check_flows(fh, fa)
    load = fh / link.m + fa / link.M
    return link.a + link.gamma * _scalar_power(load, int(link.beta))


def link_delay_grad(link: Link, fh: float, fa: float) -> Tuple[float, float]:
    """
    Partial derivatives of the link delay with respect to fh and fa.
    """
    _check_flows(fh, fa)
    load = fh / link.m + fa / link.M
    common = link.gamma * link.beta * _scalar_power(load, int(link.beta) - 1)
    return common / link.m, common / link.M


class DelayModel:
    """
    Vectorized evaluator of the game on one (network, path set); shared by all solvers.
    """

    def __init__(self, net: Network, paths: PathSet):
        check_dimensions(net, paths)
        self.network = net
        self.paths = paths
        self.a = np.array([link.a for link in net.links])
        self.gamma = np.array([link.gamma for link in net.links])
        self.beta = np.array([link.beta for link in net.links], dtype=np.int64)
        self.m = np.array([link.m for link in net.links])
        self.M = np.array([link.M for link in net.links])
        self.incidence = np.array(paths.incidence)
        self.groups = paths.od_slices
        self.group_starts = np.array([group.start for group in paths.od_slices], dtype=np.int64)
        counts = [group.stop - group.start for group in paths.od_slices]
        self.path_od = np.repeat(np.arange(len(counts)), counts)
        self.demand_h = np.array(net.demand_h)
        self.demand_a = np.array(net.demand_a)

    def link_flows(self, fh: np.ndarray, fa: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.incidence @ fh, self.incidence @ fa

    def link_load(self, link_h: np.ndarray, link_a: np.ndarray) -> np.ndarray:
        return link_h / self.m + link_a / self.M

    def link_delays(self, link_h: np.ndarray, link_a: np.ndarray) -> np.ndarray:
        return self.a + self.gamma * _int_power(self.link_load(link_h, link_a), self.beta)

    def link_gradients(self, link_h: np.ndarray, link_a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        common = self.gamma * self.beta * _int_power(self.link_load(link_h, link_a), self.beta - 1)
        return common / self.m, common / self.M

    def path_delays(self, fh: np.ndarray, fa: np.ndarray):
        link_h, link_a = self.link_flows(fh, fa)
        delays = self.link_delays(link_h, link_a)
        return self.incidence.T @ delays, delays, link_h, link_a

    def social_delay(self, fh: np.ndarray, fa: np.ndarray) -> float:
        link_h, link_a = self.link_flows(fh, fa)
        return float(np.dot(link_h + link_a, self.link_delays(link_h, link_a)))

    def social_gradient(self, fh: np.ndarray, fa: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """
        Gradient of J with respect to path flows: per path, delay plus the marginal externality.
        """
        link_h, link_a = self.link_flows(fh, fa)
        delays = self.link_delays(link_h, link_a)
        grad_h, grad_a = self.link_gradients(link_h, link_a)
        link_total = link_h + link_a
        path_grad_h = self.incidence.T @ (delays + link_total * grad_h)
        path_grad_a = self.incidence.T @ (delays + link_total * grad_a)
        return path_grad_h, path_grad_a, float(np.dot(link_total, delays))

    def od_minimum(self, path_values: np.ndarray) -> np.ndarray:
        return np.minimum.reduceat(path_values, self.group_starts)

    def wardrop_gap(self, fh: np.ndarray, fa: np.ndarray, cost_h: np.ndarray, cost_a: np.ndarray):
        """
        Returns (gap, normalizer): the flow-weighted excess over the per-O/D minimum
        cost, and sum_w r_w^h c_w^h + r_w^a c_w^a.
        """
        min_h = self.od_minimum(cost_h)
        min_a = self.od_minimum(cost_a)
        gap = float(np.dot(fh, cost_h - min_h[self.path_od]) + np.dot(fa, cost_a - min_a[self.path_od]))
        normalizer = float(np.dot(self.demand_h, min_h) + np.dot(self.demand_a, min_a))
        return max(gap, 0.0), normalizer


@dataclass(frozen=True, eq=False)
class CostBreakdown:
    link_flow: LinkFlow
    link_delay: np.ndarray
    path_delay: np.ndarray
    path_cost_h: np.ndarray
    path_cost_a: np.ndarray
    social_delay: float
    total_cost: float

    def collected_prices(self, tau: PriceVector) -> float:
        return float(np.dot(self.link_flow.fh, tau.tau_h) + np.dot(self.link_flow.fa, tau.tau_a))


def evaluate(net: Network, paths: PathSet, f: PathFlow, tau: PriceVector) -> CostBreakdown:
    """
    Computes every per-link and per-path quantity of flow ``f`` under prices ``tau``.

    Path flows in [-FEASIBILITY_EPS, 0) are read as zero, matching ``is_feasible``.
    """
    check_dimensions(net, paths, f)
    if np.any(f.fh < -FEASIBILITY_EPS) or np.any(f.fa < -FEASIBILITY_EPS):
        raise NegativeFlowError("path flows must be nonnegative")
    if np.any(f.fh < 0) or np.any(f.fa < 0):
        f = PathFlow(np.maximum(f.fh, 0.0), np.maximum(f.fa, 0.0))
    model = DelayModel(net, paths)
    link_flow = aggregate(net, paths, f)
    delays = model.link_delays(link_flow.fh, link_flow.fa)
    path_delay = paths.incidence.T @ delays
    price_h, price_a = tau.path_prices(paths)
    cost_h = path_delay + price_h
    cost_a = path_delay + price_a
    return CostBreakdown(
        link_flow=link_flow,
        link_delay=delays,
        path_delay=path_delay,
        path_cost_h=cost_h,
        path_cost_a=cost_a,
        social_delay=float(np.dot(link_flow.total, delays)),
        total_cost=float(np.dot(f.fh, cost_h) + np.dot(f.fa, cost_a)),
    )


def social_delay(net: Network, paths: PathSet, f: PathFlow, strict: bool = False) -> float:
    """
    J(f) = sum over links of f_l * e_l(f_l^h, f_l^a).
    """
    if strict:
        require_feasible(net, paths, f)
    return evaluate(net, paths, f, PriceVector.zeros(net)).social_delay


def total_cost(net: Network, paths: PathSet, f: PathFlow, tau: PriceVector) -> float:
    """
    C(f) = sum over paths of fh_p * c_p^h + fa_p * c_p^a.
    """
    return evaluate(net, paths, f, tau).total_cost


def od_travel_costs(net: Network, paths: PathSet, f: PathFlow, tau: PriceVector) -> Dict[str, Tuple[float, float]]:
    """
    Minimum path cost per O/D pair and class.
    """
    breakdown = evaluate(net, paths, f, tau)
    costs = {}
    for od, group in zip(net.od_pairs, paths.od_slices):
        costs[od.id] = (float(breakdown.path_cost_h[group].min()), float(breakdown.path_cost_a[group].min()))
    return costs


def relative_difference(left: float, right: float) -> float:
    return abs(left - right) / max(abs(left), abs(right), 1e-300)
