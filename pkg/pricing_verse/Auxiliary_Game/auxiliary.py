"""
Auxiliary single-capacity game of a homogeneous network, and the certificate
that the equilibria induced by marginal prices share one social delay.

On a network where every link has the same asymmetry mu, scaling autonomous
flow by mu and giving both classes the human-only capacity m leaves every link
delay (and every class cost) unchanged:

    e~(fh, mu*fa) = a + gamma * ((fh + mu*fa) / m) ** beta = e(fh, fa)

In the auxiliary game all link costs depend on the total f~h + f~a alone and
differ only by additive price constants, so the total link flow is the same at
every auxiliary equilibrium.
"""

from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from routing_core.delay_model import PriceVector, evaluate
from routing_core.network import Network, OdPair, PathFlow, PathSet
from solver_verse.UE_Solver.solver import EquilibriumResult, normalized_wardrop_gap
from utils.logger import log


@dataclass(frozen=True, eq=False)
class AuxiliaryGame:
    base: Network
    mu: float
    network: Network
    tau: PriceVector

    @property
    def demand_h(self) -> np.ndarray:
        return self.network.demand_h

    @property
    def demand_a(self) -> np.ndarray:
        return self.network.demand_a

    def link_delays(self, paths: PathSet, f_tilde: PathFlow) -> np.ndarray:
        return evaluate(self.network, paths, f_tilde, self.tau).link_delay

    def link_costs(self, paths: PathSet, f_tilde: PathFlow) -> Tuple[np.ndarray, np.ndarray]:
        delays = self.link_delays(paths, f_tilde)
        return delays + self.tau.tau_h, delays + self.tau.tau_a


def build_auxiliary(net: Network, tau: PriceVector) -> AuxiliaryGame:
    """
    Builds the auxiliary game: r~a = mu * ra and M replaced by m on every link.

    Raises:
        HeterogeneousNetworkError: If the links' mu differ.
    """
    mu = net.homogeneous_mu()
    links = tuple(replace(link, M=link.m) for link in net.links)
    od_pairs = tuple(OdPair(id=od.id, origin=od.origin, destination=od.destination, demand_h=od.demand_h,
                            demand_a=mu * od.demand_a) for od in net.od_pairs)
    return AuxiliaryGame(base=net, mu=mu, network=Network(nodes=net.nodes, links=links, od_pairs=od_pairs),
                         tau=tau)


def map_to_auxiliary(f: PathFlow, mu: float) -> PathFlow:
    return PathFlow(f.fh, mu * f.fa)


def auxiliary_gap(aux: AuxiliaryGame, paths: PathSet, f_tilde: PathFlow) -> float:
    """
    Normalized Wardrop gap of ``f_tilde`` in the auxiliary game.
    """
    return normalized_wardrop_gap(aux.network, paths, f_tilde, aux.tau)


@dataclass(frozen=True)
class CertificateCheck:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    reason: str
    equilibria: int
    checks: Tuple[CertificateCheck, ...] = ()
    skipped: Tuple[int, ...] = ()
    mu: float = float("nan")
    social_delays: Tuple[float, ...] = field(default=())

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"check": check.name, "residual": check.residual, "threshold": check.threshold,
              "passed": check.passed} for check in self.checks],
            columns=["check", "residual", "threshold", "passed"],
        )

    def lines(self) -> List[str]:
        lines = [f"certificate: {self.status} ({self.reason})",
                 f"equilibria checked: {self.equilibria}, skipped (not converged): {list(self.skipped)}"]
        lines += [f"  {check.name:<24} residual {check.residual:.3e}  threshold {check.threshold:.1e}  "
                  f"{'ok' if check.passed else 'FAILED'}" for check in self.checks]
        return lines


def _failed(reason: str, equilibria: Sequence[EquilibriumResult]) -> CertificateReport:
    log.warning("Certificate FAIL: %s", reason)
    return CertificateReport(passed=False, reason=reason, equilibria=len(equilibria))


def certify_social_delay_uniqueness(net: Network, paths: PathSet, tau: PriceVector,
                                    equilibria: Sequence[EquilibriumResult], tol: float = 1e-4) -> CertificateReport:
    """
    Checks the auxiliary-game argument on computed equilibria:

    1. each mapped equilibrium satisfies the auxiliary Wardrop conditions (gap <= tol);
    2. fh + mu*fa per link agrees across equilibria;
    3. social delays agree, and C(f) = J(f) + sum_l tau_l^h (fh_l + mu*fa_l) holds for each.

    Residuals of checks 2 and 3 are relative to max(1, magnitude). A failing certificate is a
    finding, never an exception.
    """
    digests = {result.tau_digest for result in equilibria}
    if digests - {tau.digest()}:
        return _failed("equilibria were computed under a different price vector", equilibria)
    if not net.is_homogeneous():
        return _failed("inapplicable: network is heterogeneous", equilibria)

    converged = [result for result in equilibria if result.converged]
    skipped = tuple(result.seed for result in equilibria if not result.converged)
    if not converged:
        return _failed("no converged equilibria", equilibria)

    aux = build_auxiliary(net, tau)
    mu = aux.mu

    aux_gap = max(auxiliary_gap(aux, paths, map_to_auxiliary(result.flow, mu)) for result in converged)

    scaled = np.array([result.link_flow.scaled_total(mu) for result in converged])
    scaled_spread = float(np.max(scaled.max(axis=0) - scaled.min(axis=0)))
    scaled_spread /= max(1.0, float(np.abs(scaled).max()))

    delays = np.array([result.social_delay for result in converged])
    delay_scale = max(1.0, float(np.abs(delays).max()))
    delay_spread = float(delays.max() - delays.min()) / delay_scale

    decomposition = max(
        abs(result.total_cost - result.social_delay - float(np.dot(tau.tau_h, result.link_flow.scaled_total(mu))))
        / max(1.0, abs(result.total_cost))
        for result in converged
    )

    checks = (
        CertificateCheck("auxiliary_gap", aux_gap, tol),
        CertificateCheck("scaled_link_flow_spread", scaled_spread, tol),
        CertificateCheck("social_delay_spread", delay_spread, tol),
        CertificateCheck("cost_decomposition", decomposition, tol),
    )
    passed = all(check.passed for check in checks)
    failing = [check.name for check in checks if not check.passed]
    reason = "all checks passed" if passed else f"failed checks: {', '.join(failing)}"
    if skipped:
        log.warning("Certificate skipped %d non-converged equilibria: %s", len(skipped), list(skipped))
    log.info("Certificate %s over %d equilibria (%s)", "PASS" if passed else "FAIL", len(converged), reason)
    return CertificateReport(passed=passed, reason=reason, equilibria=len(converged), checks=checks,
                             skipped=skipped, mu=mu, social_delays=tuple(float(delay) for delay in delays))
