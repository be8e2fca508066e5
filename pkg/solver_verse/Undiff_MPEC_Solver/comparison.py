"""
Compares no pricing, the best undifferentiated prices and differentiated
marginal prices by the social delay of the equilibria each one induces.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from pricing_verse.Marginal_Pricing.pipeline import PipelineResult, price_pipeline
from routing_core.delay_model import PriceVector
from routing_core.network import Network, PathSet, enumerate_paths
from solver_model.solver_options import SolverProfile
from solver_verse.UE_Solver.solver import EquilibriumResult, solve_equilibrium
from solver_verse.Undiff_MPEC_Solver.solver import UndiffSearchResult, solve_undiff_mpec
from utils.logger import log

COLUMNS = ["regime", "min_social_delay", "max_social_delay", "gap_to_optimum", "relative_gap", "converged",
           "restarts"]

NO_PRICING = "no pricing"
UNDIFFERENTIATED = "best undifferentiated"
DIFFERENTIATED = "differentiated marginal"


@dataclass(frozen=True)
class RegimeRow:
    regime: str
    min_social_delay: float
    max_social_delay: float
    gap_to_optimum: float
    relative_gap: float
    converged: int
    restarts: int


@dataclass(frozen=True, eq=False)
class RegimeComparison:
    optimum: float
    rows: List[RegimeRow]
    pipeline: PipelineResult
    mpec: UndiffSearchResult

    def row(self, regime: str) -> RegimeRow:
        return next(row for row in self.rows if row.regime == regime)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows], columns=COLUMNS)

    def to_text(self) -> str:
        header = f"social optimum J* = {self.optimum:.6f}\n"
        return header + self.to_frame().to_string(index=False, float_format=lambda value: f"{value:.6f}")


def regime_row(regime: str, equilibria: Sequence[EquilibriumResult], optimum: float) -> RegimeRow:
    delays = [result.social_delay for result in equilibria if result.converged]
    low = min(delays, default=float("nan"))
    return RegimeRow(
        regime=regime,
        min_social_delay=low,
        max_social_delay=max(delays, default=float("nan")),
        gap_to_optimum=low - optimum,
        relative_gap=(low - optimum) / abs(optimum) if optimum else float("nan"),
        converged=len(delays),
        restarts=len(equilibria),
    )


def compare_pricing_regimes(net: Network, opts: Optional[SolverProfile] = None,
                            paths: Optional[PathSet] = None) -> RegimeComparison:
    """
    Builds the regime table; J* and the marginal prices come from one pipeline run and are
    reused by the undifferentiated search.
    """
    opts = opts or SolverProfile()
    paths = paths if paths is not None else enumerate_paths(net)

    pipeline = price_pipeline(net, opts.pipeline, paths)
    optimum = pipeline.fstar.objective

    untolled = solve_equilibrium(net, paths, PriceVector.zeros(net), opts.ue)
    mpec = solve_undiff_mpec(net, paths, opts.mpec, opts.so, reference=(pipeline.fstar, pipeline.tau))
    undifferentiated = solve_equilibrium(net, paths, mpec.best_tau, opts.ue, initial=mpec.best_flow)

    rows = [
        regime_row(NO_PRICING, untolled, optimum),
        regime_row(UNDIFFERENTIATED, undifferentiated, optimum),
        regime_row(DIFFERENTIATED, pipeline.equilibria, optimum),
    ]
    comparison = RegimeComparison(optimum=optimum, rows=rows, pipeline=pipeline, mpec=mpec)
    log.info("Pricing regimes:\n%s", comparison.to_text())
    return comparison


if __name__ == "__main__":
    from routing_core.network_loader import load_network

    print(compare_pricing_regimes(load_network(Path(__file__).resolve().parents[2] / "networks" / "example1.net"))
          .to_text())
