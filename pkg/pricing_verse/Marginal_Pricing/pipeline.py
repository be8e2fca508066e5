"""
Runs social optimum -> marginal prices -> induced equilibria and summarizes
how the equilibria's social delay compares to the optimum.
"""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

from routing_core.delay_model import PriceVector, relative_difference
from routing_core.network import Network, PathSet, enumerate_paths
from solver_model.solver_options import PipelineOptions
from solver_verse.SO_Solver.solver import SoSolution, solve_social_optimum
from solver_verse.UE_Solver.solver import EquilibriumResult, normalized_wardrop_gap, solve_equilibrium
from pricing_verse.Marginal_Pricing.pricing import PriceStructureReport, check_price_structure, marginal_prices
from utils.logger import log


@dataclass(frozen=True)
class PipelineSummary:
    optimum: float
    min_social_delay: float
    max_social_delay: float
    spread: float
    restarts: int
    converged: int
    at_optimum: int
    all_within: bool
    witness_gap: float
    witness_passed: bool
    homogeneous: bool
    price_structure: str
    price_structure_deviation: float
    acceptance_rtol: float

    @property
    def passed(self) -> bool:
        """
        Homogeneous networks need every converged equilibrium at J*; otherwise one suffices.
        """
        if self.converged == 0 or not self.witness_passed:
            return False
        return self.all_within if self.homogeneous else self.at_optimum >= 1

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}

    def lines(self) -> List[str]:
        return [
            f"J* (social optimum)          : {self.optimum:.6f}",
            f"equilibria converged         : {self.converged} / {self.restarts}",
            f"equilibrium social delay     : min {self.min_social_delay:.6f}, max {self.max_social_delay:.6f}",
            f"relative spread              : {self.spread:.3e} (tolerance {self.acceptance_rtol:.1e})",
            f"equilibria at J*             : {self.at_optimum}",
            f"all equilibria at J*         : {self.all_within}",
            f"optimum is priced equilibrium: {self.witness_passed} (normalized gap {self.witness_gap:.3e})",
            f"homogeneous network          : {self.homogeneous}",
            f"price structure tau_a=mu*tau_h: {self.price_structure} (deviation {self.price_structure_deviation:.3e})",
            f"result                       : {'PASS' if self.passed else 'FAIL'}",
        ]


@dataclass(frozen=True, eq=False)
class PipelineResult:
    fstar: SoSolution
    tau: PriceVector
    equilibria: List[EquilibriumResult]
    structure: PriceStructureReport
    summary: PipelineSummary


def summarize(net: Network, fstar: SoSolution, equilibria: List[EquilibriumResult], witness_gap: float,
              witness_tol: float, structure: PriceStructureReport, rtol: float) -> PipelineSummary:
    delays = [result.social_delay for result in equilibria if result.converged]
    low = min(delays) if delays else float("nan")
    high = max(delays) if delays else float("nan")
    at_optimum = sum(1 for delay in delays if relative_difference(delay, fstar.objective) <= rtol)
    return PipelineSummary(
        optimum=fstar.objective,
        min_social_delay=low,
        max_social_delay=high,
        spread=(high - low) / abs(fstar.objective) if delays and fstar.objective else float("nan"),
        restarts=len(equilibria),
        converged=len(delays),
        at_optimum=at_optimum,
        all_within=bool(delays) and at_optimum == len(delays),
        witness_gap=witness_gap,
        witness_passed=witness_gap <= witness_tol,
        homogeneous=net.is_homogeneous(),
        price_structure=structure.status,
        price_structure_deviation=structure.max_deviation,
        acceptance_rtol=rtol,
    )


def price_pipeline(net: Network, opts: Optional[PipelineOptions] = None,
                   paths: Optional[PathSet] = None) -> PipelineResult:
    """
    Solves for f*, prices it at marginal cost and searches the induced equilibria.

    With ``opts.witness`` the first equilibrium restart starts from f* itself, so at
    least one equilibrium at J* is observable even where uniqueness does not hold.
    """
    opts = opts or PipelineOptions()
    paths = paths if paths is not None else enumerate_paths(net)

    fstar = solve_social_optimum(net, paths, opts.so)
    tau = marginal_prices(net, paths, fstar.flow)
    structure = check_price_structure(net, tau)
    witness_gap = normalized_wardrop_gap(net, paths, fstar.flow, tau)
    log.info("J* = %.6f; witness gap under marginal prices %.3e", fstar.objective, witness_gap)

    equilibria = solve_equilibrium(net, paths, tau, opts.ue, initial=fstar.flow if opts.witness else None)
    summary = summarize(net, fstar, equilibria, witness_gap, 10 * opts.so.tol, structure, opts.acceptance_rtol)
    for line in summary.lines():
        log.info(line)
    return PipelineResult(fstar=fstar, tau=tau, equilibria=equilibria, structure=structure, summary=summary)


if __name__ == "__main__":
    from routing_core.network_loader import load_network

    price_pipeline(load_network(Path(__file__).resolve().parents[2] / "networks" / "example1.net"))
