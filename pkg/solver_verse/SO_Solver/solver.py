"""
Defines the SocialOptimumSolver that minimizes the social delay J(f) over
feasible path flows, and the KKT verifier for a candidate optimum.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from routing_core.delay_model import DelayModel, PriceVector, evaluate
from routing_core.network import Network, PathFlow, PathSet, enumerate_paths, is_feasible
from solver_model.solver_options import SoOptions
from utils.logger import log
from utils.metrics import SolveStats, collect_restart_stats, log_solve_stats
from utils.restarts import best_index, restart_generators, run_restarts
from utils.simplex import project_grouped, random_grouped

# Solver name as it appears in logs and metrics
SOLVER_NAME = "SO_Solver"

# Relative allowance for rounding noise in the Armijo test
ROUNDING_SLACK = 4 * np.finfo(float).eps
MIN_STEP = 1e-16
MAX_STEP = 1e6


@dataclass(frozen=True, eq=False)
class SoSolution:
    flow: PathFlow
    objective: float
    kkt_residual: float
    restarts_used: int
    converged: bool
    iterations: int
    restart_index: int
    initial_objective: float
    stationarity: float
    restart_objectives: Tuple[float, ...]


@dataclass
class RestartOutcome:
    index: int
    fh: np.ndarray
    fa: np.ndarray
    objective: float
    initial_objective: float
    iterations: int
    converged: bool
    stationarity: float


def kkt_violation(model: DelayModel, fh: np.ndarray, fa: np.ndarray, cost_h: np.ndarray, cost_a: np.ndarray,
                  flow_tol: float) -> float:
    """
    Largest excess of a used path's cost over the cheapest path of its O/D pair, over both classes.
    """
    worst = 0.0
    for group in model.groups:
        for flows, costs in ((fh, cost_h), (fa, cost_a)):
            used = flows[group] > flow_tol
            if used.any():
                worst = max(worst, float(costs[group][used].max() - costs[group].min()))
    return worst


class SocialOptimumSolver:
    """
    Multi-start projected gradient with Armijo backtracking on path flows.
    """

    def __init__(self, net: Network, paths: PathSet, options: Optional[SoOptions] = None):
        self.network = net
        self.paths = paths
        self.options = options or SoOptions()
        self.model = DelayModel(net, paths)
        self.flow_tol = 1e-9 * max(1.0, float(np.max(np.concatenate([net.demand_h, net.demand_a]))))

    def project(self, fh: np.ndarray, fa: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (project_grouped(fh, self.model.groups, self.model.demand_h),
                project_grouped(fa, self.model.groups, self.model.demand_a))

    def initial_flow(self, index: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """
        Restart 0 splits demand evenly; later restarts draw Dirichlet(1) splits.
        """
        if index == 0:
            uniform = PathFlow.uniform(self.network, self.paths)
            return np.array(uniform.fh), np.array(uniform.fa)
        size = len(self.paths)
        return (random_grouped(self.model.groups, self.model.demand_h, rng, size),
                random_grouped(self.model.groups, self.model.demand_a, rng, size))

    def stationarity(self, fh, fa, grad_h, grad_a) -> Tuple[float, float]:
        """
        Returns (||x - P(x - grad)||_inf, gradient scale).
        """
        step_h, step_a = self.project(fh - grad_h, fa - grad_a)
        residual = float(max(np.max(np.abs(step_h - fh)), np.max(np.abs(step_a - fa))))
        scale = max(1.0, float(max(np.max(np.abs(grad_h)), np.max(np.abs(grad_a)))))
        return residual, scale

    def descend(self, index: int, fh: np.ndarray, fa: np.ndarray) -> RestartOutcome:
        options = self.options
        grad_h, grad_a, objective = self.model.social_gradient(fh, fa)
        initial_objective = objective
        step = 1.0
        converged = False
        residual = float("inf")
        iterations = 0

        for iterations in range(1, options.max_iters + 1):
            residual, scale = self.stationarity(fh, fa, grad_h, grad_a)
            if residual <= options.tol * scale:
                converged = True
                break

            while True:
                new_h, new_a = self.project(fh - step * grad_h, fa - step * grad_a)
                decrease = float(np.dot(grad_h, new_h - fh) + np.dot(grad_a, new_a - fa))
                new_objective = self.model.social_delay(new_h, new_a)
                if new_objective <= objective + options.armijo * decrease + ROUNDING_SLACK * abs(objective):
                    break
                step *= 0.5
                if step < MIN_STEP:
                    break

            if step < MIN_STEP:
                log.debug("[%s] restart %d: line search stalled at iteration %d", SOLVER_NAME, index, iterations)
                break

            fh, fa = new_h, new_a
            grad_h, grad_a, objective = self.model.social_gradient(fh, fa)
            step = min(2.0 * step, MAX_STEP)

        log.debug("[%s] restart %d: J=%.10g iterations=%d residual=%.3g converged=%s",
                  SOLVER_NAME, index, objective, iterations, residual, converged)
        return RestartOutcome(index=index, fh=fh, fa=fa, objective=objective, initial_objective=initial_objective,
                              iterations=iterations, converged=converged, stationarity=residual)

    def solve(self) -> SoSolution:
        """
        Runs every restart and keeps the lowest objective (ties to the lowest restart index).
        """
        stats = SolveStats(solver=SOLVER_NAME)
        generators = restart_generators(self.options.seed, self.options.restarts)

        def restart(index: int) -> RestartOutcome:
            fh, fa = self.initial_flow(index, generators[index])
            return self.descend(index, fh, fa)

        outcomes: List[RestartOutcome] = run_restarts(restart, self.options.restarts, self.options.threads)
        objectives = [outcome.objective for outcome in outcomes]
        best = outcomes[best_index(objectives)]

        grad_h, grad_a, _ = self.model.social_gradient(best.fh, best.fa)
        solution = SoSolution(
            flow=PathFlow(best.fh, best.fa),
            objective=self.model.social_delay(best.fh, best.fa),
            kkt_residual=kkt_violation(self.model, best.fh, best.fa, grad_h, grad_a, self.flow_tol),
            restarts_used=len(outcomes),
            converged=best.converged,
            iterations=best.iterations,
            restart_index=best.index,
            initial_objective=best.initial_objective,
            stationarity=best.stationarity,
            restart_objectives=tuple(objectives),
        )

        stats.best_value = solution.objective
        log_solve_stats(collect_restart_stats(stats, outcomes).stop())
        if not solution.converged:
            log.warning("[%s] best restart %d stopped before the stationarity tolerance (residual %.3g)",
                        SOLVER_NAME, best.index, best.stationarity)
        return solution

    def run(self) -> SoSolution:
        """
        Solves and logs the optimum per path.
        """
        solution = self.solve()
        for path, flow_h, flow_a in zip(self.paths.paths, solution.flow.fh, solution.flow.fa):
            log.info("path %s %s: fh=%.6f fa=%.6f", path.od_id, "-".join(path.links), flow_h, flow_a)
        log.info("J* = %.6f (restart %d, KKT residual %.3g)", solution.objective, solution.restart_index,
                 solution.kkt_residual)
        return solution


def solve_social_optimum(net: Network, paths: PathSet, opts: Optional[SoOptions] = None) -> SoSolution:
    return SocialOptimumSolver(net, paths, opts).solve()


@dataclass(frozen=True)
class KktGroupCheck:
    od_id: str
    vehicle_class: str
    common_cost: float
    violation: float


@dataclass(frozen=True)
class KktReport:
    max_violation: float
    passed: bool
    feasible: bool
    groups: Tuple[KktGroupCheck, ...]


def verify_so_kkt(net: Network, paths: PathSet, sol: Union[SoSolution, PathFlow], tau: PriceVector,
                  tol: float = 1e-4) -> KktReport:
    """
    Checks that, per O/D pair and class, used paths (flow > tol) share the cheapest
    delay-plus-price cost; reports the largest violation.
    """
    flow = sol.flow if isinstance(sol, SoSolution) else sol
    breakdown = evaluate(net, paths, flow, tau)
    checks = []
    for od, group in zip(net.od_pairs, paths.od_slices):
        for vehicle_class, flows, costs in (("h", flow.fh, breakdown.path_cost_h),
                                            ("a", flow.fa, breakdown.path_cost_a)):
            used = flows[group] > tol
            if not used.any():
                continue
            cheapest = float(costs[group].min())
            checks.append(KktGroupCheck(
                od_id=od.id,
                vehicle_class=vehicle_class,
                common_cost=float(costs[group][used].min()),
                violation=float(costs[group][used].max()) - cheapest,
            ))
    max_violation = max((check.violation for check in checks), default=0.0)
    return KktReport(
        max_violation=max_violation,
        passed=max_violation <= tol,
        feasible=is_feasible(net, paths, flow).feasible,
        groups=tuple(checks),
    )


if __name__ == "__main__":
    from routing_core.network_loader import load_network

    example_network = load_network(Path(__file__).resolve().parents[2] / "networks" / "example1.net")
    SocialOptimumSolver(example_network, enumerate_paths(example_network)).run()
