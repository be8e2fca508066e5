"""
Defines the EquilibriumSolver that finds Wardrop equilibria of the priced
two-class routing game, and the Wardrop gap used to measure them.

Each restart runs a self-adaptive extragradient method on path flows. The
autonomous class moves with step s/mu (mu the mean link asymmetry), so on a
homogeneous network the iteration is a plain extragradient in the
auxiliary-game coordinates (fh, mu*fa), where the cost map is monotone.
Whenever the step collapses, the restart falls back to one successive-averages
step toward the all-or-nothing flow.
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from routing_core.delay_model import DelayModel, PriceVector, evaluate
from routing_core.network import LinkFlow, Network, PathFlow, PathSet, enumerate_paths, require_feasible
from solver_model.solver_options import EqOptions
from utils.logger import log
from utils.metrics import SolveStats, collect_restart_stats, log_solve_stats
from utils.restarts import restart_generators, run_restarts
from utils.simplex import project_grouped, random_grouped

# Solver name as it appears in logs and metrics
SOLVER_NAME = "UE_Solver"

INITIAL_STEP = 1.0
STEP_GROWTH = 1.5


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    flow: PathFlow
    gap: float
    normalized_gap: float
    od_costs: Dict[str, Tuple[float, float]]
    social_delay: float
    total_cost: float
    converged: bool
    seed: int
    iterations: int
    link_flow: LinkFlow
    tau_digest: str
    duplicate_of: Optional[int] = None


def normalized(gap: float, normalizer: float) -> float:
    return gap / normalizer if normalizer > 0 else 0.0


def wardrop_gap(net: Network, paths: PathSet, f: PathFlow, tau: PriceVector) -> float:
    """
    Flow-weighted excess of every path's cost over its O/D minimum, summed over both classes.

    Raises:
        InfeasibleFlowError: If ``f`` does not meet the demands.
    """
    require_feasible(net, paths, f)
    breakdown = evaluate(net, paths, f, tau)
    gap, _ = DelayModel(net, paths).wardrop_gap(f.fh, f.fa, breakdown.path_cost_h, breakdown.path_cost_a)
    return gap


def normalized_wardrop_gap(net: Network, paths: PathSet, f: PathFlow, tau: PriceVector) -> float:
    """
    Wardrop gap divided by sum_w (r_w^h c_w^h + r_w^a c_w^a).
    """
    require_feasible(net, paths, f)
    breakdown = evaluate(net, paths, f, tau)
    return normalized(*DelayModel(net, paths).wardrop_gap(f.fh, f.fa, breakdown.path_cost_h,
                                                          breakdown.path_cost_a))


@dataclass
class RestartOutcome:
    index: int
    fh: np.ndarray
    fa: np.ndarray
    iterations: int
    msa_steps: int


class EquilibriumSolver:
    """
    Multi-start extragradient search for Wardrop equilibria under fixed prices.
    """

    def __init__(self, net: Network, paths: PathSet, tau: Optional[PriceVector] = None,
                 options: Optional[EqOptions] = None):
        self.network = net
        self.paths = paths
        self.tau = tau if tau is not None else PriceVector.zeros(net)
        self.options = options or EqOptions()
        self.model = DelayModel(net, paths)
        self.price_h, self.price_a = self.tau.path_prices(paths)
        self.mu = float(net.mu.mean())

    def costs(self, fh: np.ndarray, fa: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        path_delay = self.model.path_delays(fh, fa)[0]
        return path_delay + self.price_h, path_delay + self.price_a

    def normalized_gap(self, fh, fa, cost_h, cost_a) -> float:
        return normalized(*self.model.wardrop_gap(fh, fa, cost_h, cost_a))

    def project(self, fh: np.ndarray, fa: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (project_grouped(fh, self.model.groups, self.model.demand_h),
                project_grouped(fa, self.model.groups, self.model.demand_a))

    def all_or_nothing(self, cost_h: np.ndarray, cost_a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Loads each O/D demand of each class onto its current cheapest path.
        """
        target_h = np.zeros(len(self.paths))
        target_a = np.zeros(len(self.paths))
        for group, demand_h, demand_a in zip(self.model.groups, self.model.demand_h, self.model.demand_a):
            target_h[group.start + int(np.argmin(cost_h[group]))] = demand_h
            target_a[group.start + int(np.argmin(cost_a[group]))] = demand_a
        return target_h, target_a

    def initial_flow(self, index: int, rng: np.random.Generator,
                     initial: Optional[PathFlow]) -> Tuple[np.ndarray, np.ndarray]:
        if index == 0:
            start = initial if initial is not None else PathFlow.uniform(self.network, self.paths)
            return np.array(start.fh, dtype=float), np.array(start.fa, dtype=float)
        size = len(self.paths)
        return (random_grouped(self.model.groups, self.model.demand_h, rng, size),
                random_grouped(self.model.groups, self.model.demand_a, rng, size))

    def iterate(self, index: int, fh: np.ndarray, fa: np.ndarray) -> RestartOutcome:
        options = self.options
        mu = self.mu
        step = INITIAL_STEP
        msa_steps = 0
        iterations = 0
        cost_h, cost_a = self.costs(fh, fa)

        for iterations in range(1, options.max_iters + 1):
            if self.normalized_gap(fh, fa, cost_h, cost_a) <= options.tol:
                break

            moved = 0.0
            while step >= options.min_step:
                bar_h, bar_a = self.project(fh - step * cost_h, fa - (step / mu) * cost_a)
                moved = float(np.sqrt(np.sum((bar_h - fh) ** 2) + mu * mu * np.sum((bar_a - fa) ** 2)))
                if moved == 0.0:
                    break
                bar_cost_h, bar_cost_a = self.costs(bar_h, bar_a)
                change = float(np.sqrt(np.sum((bar_cost_h - cost_h) ** 2) + np.sum((bar_cost_a - cost_a) ** 2)))
                if step * change <= options.step_ratio * moved:
                    break
                step *= 0.5

            if step < options.min_step:
                # successive averages toward the cheapest paths
                target_h, target_a = self.all_or_nothing(cost_h, cost_a)
                weight = 1.0 / (msa_steps + 2)
                fh = fh + weight * (target_h - fh)
                fa = fa + weight * (target_a - fa)
                msa_steps += 1
                step = INITIAL_STEP
            elif moved == 0.0:
                log.debug("[%s] restart %d: fixed point reached at iteration %d", SOLVER_NAME, index, iterations)
                break
            else:
                fh, fa = self.project(fh - step * bar_cost_h, fa - (step / mu) * bar_cost_a)
                if step * change <= 0.5 * options.step_ratio * moved:
                    step *= STEP_GROWTH

            cost_h, cost_a = self.costs(fh, fa)

        return RestartOutcome(index=index, fh=fh, fa=fa, iterations=iterations, msa_steps=msa_steps)

    def result(self, outcome: RestartOutcome) -> EquilibriumResult:
        """
        Re-evaluates a restart's final flow from scratch into a stored result.
        """
        flow = PathFlow(outcome.fh, outcome.fa)
        breakdown = evaluate(self.network, self.paths, flow, self.tau)
        gap, normalizer = self.model.wardrop_gap(flow.fh, flow.fa, breakdown.path_cost_h, breakdown.path_cost_a)
        od_costs = {
            od.id: (float(breakdown.path_cost_h[group].min()), float(breakdown.path_cost_a[group].min()))
            for od, group in zip(self.network.od_pairs, self.paths.od_slices)
        }
        normalized_gap = normalized(gap, normalizer)
        converged = normalized_gap <= self.options.tol
        log.debug("[%s] restart %d: J=%.10g gap=%.3g iterations=%d msa_steps=%d converged=%s", SOLVER_NAME,
                  outcome.index, breakdown.social_delay, normalized_gap, outcome.iterations, outcome.msa_steps,
                  converged)
        return EquilibriumResult(
            flow=flow,
            gap=gap,
            normalized_gap=normalized_gap,
            od_costs=od_costs,
            social_delay=breakdown.social_delay,
            total_cost=breakdown.total_cost,
            converged=converged,
            seed=outcome.index,
            iterations=outcome.iterations,
            link_flow=breakdown.link_flow,
            tau_digest=self.tau.digest(),
        )

    def solve(self, initial: Optional[PathFlow] = None) -> List[EquilibriumResult]:
        """
        Runs every restart; the list holds one result per restart in restart order,
        with duplicates flagged rather than removed.
        """
        if initial is not None:
            require_feasible(self.network, self.paths, initial)
        stats = SolveStats(solver=SOLVER_NAME)
        generators = restart_generators(self.options.seed, self.options.restarts)

        def restart(index: int) -> EquilibriumResult:
            fh, fa = self.initial_flow(index, generators[index], initial)
            return self.result(self.iterate(index, fh, fa))

        results = flag_duplicates(run_restarts(restart, self.options.restarts, self.options.threads),
                                  self.options.dedup_distance)
        converged = [result.social_delay for result in results if result.converged]
        stats.best_value = min(converged) if converged else float("nan")
        log_solve_stats(collect_restart_stats(stats, results).stop())
        return results

    def run(self) -> List[EquilibriumResult]:
        """
        Solves and logs one line per restart.
        """
        results = self.solve()
        for result in results:
            log.info("restart %d: J=%.6f C=%.6f gap=%.3g converged=%s duplicate_of=%s", result.seed,
                     result.social_delay, result.total_cost, result.normalized_gap, result.converged,
                     result.duplicate_of)
        return results


def flag_duplicates(results: Sequence[EquilibriumResult], distance: float) -> List[EquilibriumResult]:
    """
    Marks each result whose link flows lie within ``distance`` of an earlier distinct result.
    """
    flagged: List[EquilibriumResult] = []
    for result in results:
        vector = result.link_flow.as_vector()
        duplicate_of = None
        for earlier in flagged:
            if earlier.duplicate_of is None and np.linalg.norm(vector - earlier.link_flow.as_vector()) < distance:
                duplicate_of = earlier.seed
                break
        flagged.append(result if duplicate_of is None else replace(result, duplicate_of=duplicate_of))
    return flagged


def unique_equilibria(results: Sequence[EquilibriumResult]) -> List[EquilibriumResult]:
    return [result for result in results if result.duplicate_of is None]


def scaled_load_spread(net: Network, results: Sequence[EquilibriumResult]) -> float:
    """
    Largest per-link range of fh + mu * fa across ``results``; NaN when empty.
    """
    if not results:
        return float("nan")
    loads = np.array([result.link_flow.scaled_total(net.mu) for result in results])
    return float(np.max(loads.max(axis=0) - loads.min(axis=0), initial=0.0))


def solve_equilibrium(net: Network, paths: PathSet, tau: PriceVector, opts: Optional[EqOptions] = None,
                      initial: Optional[PathFlow] = None) -> List[EquilibriumResult]:
    return EquilibriumSolver(net, paths, tau, opts).solve(initial)


if __name__ == "__main__":
    from routing_core.network_loader import load_network

    example_network = load_network(Path(__file__).resolve().parents[2] / "networks" / "example1.net")
    EquilibriumSolver(example_network, enumerate_paths(example_network)).run()
