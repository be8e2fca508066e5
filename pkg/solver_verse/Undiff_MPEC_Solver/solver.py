"""
Defines the UndiffMpecSolver: the best undifferentiated prices (tau_h = tau_a
on every link) found by a compass pattern search over the price box, where each
price vector is scored by the lowest social delay among the equilibria it
induces.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from pricing_verse.Marginal_Pricing.pricing import marginal_prices
from routing_core.delay_model import PriceVector
from routing_core.network import Network, PathFlow, PathSet, enumerate_paths
from solver_model.solver_options import EqOptions, MpecOptions, SoOptions
from solver_verse.SO_Solver.solver import SoSolution, solve_social_optimum
from solver_verse.UE_Solver.solver import solve_equilibrium
from utils.logger import log
from utils.metrics import SolveStats, log_solve_stats

# Solver name as it appears in logs and metrics
SOLVER_NAME = "Undiff_MPEC_Solver"

# Fallback box edge when the reference prices are all zero
DEFAULT_TAU_MAX = 1.0
# Required improvement, relative to the inner tolerance, before a poll point is accepted
IMPROVEMENT_FACTOR = 10.0


class BudgetExhausted(Exception):
    """
    Raised inside the search when the next price vector would exceed the inner-solve budget.
    """


@dataclass(frozen=True, eq=False)
class TraceEntry:
    evaluation: int
    start: int
    tau: np.ndarray
    objective: float
    social_delays: Tuple[float, ...]
    gaps: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class UndiffSearchResult:
    best_tau: PriceVector
    best_social_delay: float
    best_flow: Optional[PathFlow]
    evaluations: int
    inner_solves: int
    trace: List[TraceEntry]
    tau_max: float
    widenings: int
    budget_exhausted: bool
    reference_optimum: float
    reference_tau: PriceVector
    start_values: Tuple[float, ...] = field(default=())
    link_ids: Tuple[str, ...] = field(default=())

    @property
    def converged(self) -> bool:
        return not self.budget_exhausted and np.isfinite(self.best_social_delay)

    def trace_frame(self) -> pd.DataFrame:
        names = self.link_ids or tuple(str(index) for index in range(len(self.best_tau)))
        rows = []
        for entry in self.trace:
            row = {"evaluation": entry.evaluation, "start": entry.start}
            row.update({f"tau_{name}": value for name, value in zip(names, entry.tau)})
            row.update({
                "objective": entry.objective,
                "equilibria": len(entry.social_delays),
                "min_social_delay": min(entry.social_delays, default=float("nan")),
                "max_social_delay": max(entry.social_delays, default=float("nan")),
                "max_gap": max(entry.gaps, default=float("nan")),
            })
            rows.append(row)
        return pd.DataFrame(rows)


class UndiffMpecSolver:
    """
    Nested search: pattern search over undifferentiated prices outside, multi-start
    equilibrium search inside. The budget counts inner equilibrium restarts.
    """

    def __init__(self, net: Network, paths: PathSet, options: Optional[MpecOptions] = None,
                 so_options: Optional[SoOptions] = None,
                 reference: Optional[Tuple[SoSolution, PriceVector]] = None):
        self.network = net
        self.paths = paths
        self.options = options or MpecOptions()
        self.so_options = so_options or SoOptions(seed=self.options.seed, threads=self.options.threads)
        self.reference = reference
        self.inner_options = EqOptions(
            tol=self.options.tol,
            max_iters=self.options.inner_max_iters,
            restarts=self.options.inner_restarts,
            seed=self.options.seed,
            threads=self.options.threads,
        )
        self.cache: Dict[bytes, float] = {}
        self.flows: Dict[bytes, Optional[PathFlow]] = {}
        self.trace: List[TraceEntry] = []
        self.inner_solves = 0
        self.inner_converged = 0
        self.incumbent_flow: Optional[PathFlow] = None
        self.start = 0

    def reference_prices(self) -> Tuple[SoSolution, PriceVector]:
        """
        Differentiated optimum and its marginal prices; they size the box and seed one start.
        """
        if self.reference is None:
            fstar = solve_social_optimum(self.network, self.paths, self.so_options)
            self.reference = (fstar, marginal_prices(self.network, self.paths, fstar.flow))
        return self.reference

    def initial_tau_max(self, tau: PriceVector) -> float:
        if self.options.tau_max is not None:
            return self.options.tau_max
        largest = float(max(tau.tau_h.max(initial=0.0), tau.tau_a.max(initial=0.0)))
        return self.options.tau_scale * largest if largest > 0 else DEFAULT_TAU_MAX

    def starts(self, reference_tau: PriceVector, tau_max: float) -> List[np.ndarray]:
        links = len(self.network.links)
        candidates = [np.zeros(links), np.clip(reference_tau.tau_h, 0.0, tau_max)]
        rng = np.random.default_rng(self.options.seed)
        while len(candidates) < self.options.starts:
            candidates.append(rng.uniform(0.0, tau_max, links))
        return candidates[:self.options.starts]

    def objective(self, theta: np.ndarray) -> float:
        """
        Lowest social delay among the converged equilibria under undifferentiated prices ``theta``;
        infinity when none converged.
        """
        key = np.round(theta, 12).tobytes()
        if key in self.cache:
            return self.cache[key]
        if self.inner_solves + self.inner_options.restarts > self.options.budget:
            raise BudgetExhausted()

        results = solve_equilibrium(self.network, self.paths, PriceVector.undifferentiated(theta),
                                    self.inner_options, initial=self.incumbent_flow)
        self.inner_solves += len(results)
        converged = [result for result in results if result.converged]
        self.inner_converged += len(converged)
        best = min(converged, key=lambda result: result.social_delay, default=None)
        value = best.social_delay if best is not None else float("inf")

        self.cache[key] = value
        self.flows[key] = best.flow if best is not None else None
        self.trace.append(TraceEntry(
            evaluation=len(self.trace),
            start=self.start,
            tau=np.array(theta, dtype=float),
            objective=value,
            social_delays=tuple(result.social_delay for result in converged),
            gaps=tuple(result.normalized_gap for result in converged),
        ))
        log.debug("[%s] tau=%s J=%.10g (%d/%d converged)", SOLVER_NAME, np.array2string(theta, precision=6),
                  value, len(converged), len(results))
        return value

    def accept(self, theta: np.ndarray) -> None:
        flow = self.flows.get(np.round(theta, 12).tobytes())
        if flow is not None:
            self.incumbent_flow = flow

    def pattern_search(self, theta: np.ndarray, tau_max: float) -> Tuple[np.ndarray, float]:
        """
        Compass search: polls +-delta along each coordinate, moves on the first sufficient
        improvement, halves delta after a sweep without one.
        """
        theta = np.clip(theta, 0.0, tau_max)
        value = self.objective(theta)
        self.accept(theta)
        delta = tau_max / 4.0
        while delta >= self.options.delta_min_ratio * tau_max:
            improved = False
            for index in range(theta.size):
                for sign in (-1.0, 1.0):
                    trial = theta.copy()
                    trial[index] = min(max(theta[index] + sign * delta, 0.0), tau_max)
                    if trial[index] == theta[index]:
                        continue
                    trial_value = self.objective(trial)
                    if trial_value < value - IMPROVEMENT_FACTOR * self.options.tol * max(1.0, abs(value)):
                        theta, value = trial, trial_value
                        self.accept(theta)
                        improved = True
                        break
            if not improved:
                delta /= 2.0
        return theta, value

    def solve(self) -> UndiffSearchResult:
        stats = SolveStats(solver=SOLVER_NAME)
        fstar, reference_tau = self.reference_prices()
        tau_max = self.initial_tau_max(reference_tau)
        best_theta = np.zeros(len(self.network.links))
        best_value = float("inf")
        start_values = []
        widenings = 0
        exhausted = False

        try:
            for start, theta in enumerate(self.starts(reference_tau, tau_max)):
                self.start = start
                self.incumbent_flow = None
                theta, value = self.pattern_search(theta, tau_max)
                start_values.append(value)
                log.info("[%s] start %d: J=%.6f", SOLVER_NAME, self.start, value)
                if value < best_value:
                    best_theta, best_value = theta, value

            while widenings < self.options.max_widenings and np.any(best_theta >= tau_max * (1 - 1e-12)):
                widenings += 1
                tau_max *= 2.0
                log.warning("[%s] optimum on the price box boundary; widening to tau_max=%.6g", SOLVER_NAME,
                            tau_max)
                self.start += 1
                self.accept(best_theta)
                theta, value = self.pattern_search(best_theta, tau_max)
                if value < best_value:
                    best_theta, best_value = theta, value
        except BudgetExhausted:
            exhausted = True
            log.warning("[%s] budget of %d inner solves exhausted after %d price vectors; result flagged",
                        SOLVER_NAME, self.options.budget, len(self.trace))
            for entry in self.trace:
                if entry.objective < best_value:
                    best_theta, best_value = entry.tau, entry.objective

        stats.restarts = self.inner_solves
        stats.iterations = len(self.trace)
        stats.converged = self.inner_converged
        stats.best_value = best_value
        log_solve_stats(stats.stop())

        if best_value < fstar.objective * (1 - 1e-6):
            log.warning("[%s] undifferentiated value %.6f lies below the differentiated optimum %.6f",
                        SOLVER_NAME, best_value, fstar.objective)

        return UndiffSearchResult(
            best_tau=PriceVector.undifferentiated(best_theta),
            best_social_delay=best_value,
            best_flow=self.flows.get(np.round(best_theta, 12).tobytes()),
            evaluations=len(self.trace),
            inner_solves=self.inner_solves,
            trace=list(self.trace),
            tau_max=tau_max,
            widenings=widenings,
            budget_exhausted=exhausted,
            reference_optimum=fstar.objective,
            reference_tau=reference_tau,
            start_values=tuple(start_values),
            link_ids=tuple(link.id for link in self.network.links),
        )

    def run(self) -> UndiffSearchResult:
        result = self.solve()
        log.info("best undifferentiated prices %s: J=%.6f (J*=%.6f, %d price vectors, %d inner solves)",
                 np.array2string(result.best_tau.tau_h, precision=6), result.best_social_delay,
                 result.reference_optimum, result.evaluations, result.inner_solves)
        return result


def solve_undiff_mpec(net: Network, paths: PathSet, opts: Optional[MpecOptions] = None,
                      so_options: Optional[SoOptions] = None,
                      reference: Optional[Tuple[SoSolution, PriceVector]] = None) -> UndiffSearchResult:
    return UndiffMpecSolver(net, paths, opts, so_options, reference).solve()


if __name__ == "__main__":
    from routing_core.network_loader import load_network

    example_network = load_network(Path(__file__).resolve().parents[2] / "networks" / "example1.net")
    UndiffMpecSolver(example_network, enumerate_paths(example_network)).run()
