"""
Defines the tollgrid command line: parses a run, resolves its solver profile,
dispatches to the solvers and writes the run artifacts.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from pricing_verse.Auxiliary_Game.auxiliary import CertificateReport, certify_social_delay_uniqueness
from pricing_verse.Marginal_Pricing.pipeline import price_pipeline
from pricing_verse.Marginal_Pricing.pricing import (
    check_price_structure,
    load_price_vector,
    marginal_prices,
    price_vector_frame,
)
from routing_core.delay_model import PriceVector
from routing_core.errors import TollgridError
from routing_core.network import Network, PathSet, enumerate_paths
from routing_core.network_loader import load_network
from solver_model.solver_options import SolverProfile
from solver_model.solver_options_factory import SolverOptionsFactory
from solver_verse.SO_Solver.solver import SoSolution, solve_social_optimum
from solver_verse.UE_Solver.solver import EquilibriumResult, scaled_load_spread, solve_equilibrium
from solver_verse.Undiff_MPEC_Solver.comparison import UNDIFFERENTIATED, compare_pricing_regimes
from solver_verse.Undiff_MPEC_Solver.solver import solve_undiff_mpec
from utils.artifacts import ArtifactWriter
from utils.logger import attach_run_log, detach_run_log, log, set_level

COMMANDS = ("solve-so", "solve-ue", "price", "pipeline", "certify", "undiff-mpec", "compare", "reproduce-example1")

EXAMPLE1_NETWORK = Path(__file__).resolve().parent / "networks" / "example1.net"
REPRODUCE_PROFILE = "reproduce"
DEFAULT_SEED = 0
DEFAULT_OUT = "out"
# flags whose values a --config snapshot already fixes
SNAPSHOT_FIELDS = ("network", "seed", "tol", "restarts", "budget", "prices", "profile")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_USAGE = 2
EXIT_FLAGGED = 3


class RunConfig(BaseModel):
    """
    Everything needed to replay a run; written as config.json.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    network: str
    network_sha256: str
    profile: str
    seed: int = DEFAULT_SEED
    prices: Optional[str] = None
    strict: bool = False
    out: str = DEFAULT_OUT
    options: SolverProfile

    def config_hash(self) -> str:
        """
        sha256 over the canonical JSON of the snapshot without the output directory.
        """
        canonical = json.dumps(self.model_dump(mode="json", exclude={"out"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class UsageError(Exception):
    """
    The command line is well-formed for argparse but inconsistent.
    """


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--network", help="Network file (JSON .net document)")
    common.add_argument("--seed", type=int, default=None, help=f"Restart seed (default: {DEFAULT_SEED})")
    common.add_argument("--tol", type=float, default=None, help="Solver tolerance override")
    common.add_argument("--restarts", type=int, default=None, help="Restart count override")
    common.add_argument("--budget", type=int, default=None, help="Inner equilibrium solve budget (undiff-mpec, compare)")
    common.add_argument("--prices", default=None, help="Price CSV (link_id,tau_h,tau_a) or 'none' (solve-ue, certify)")
    common.add_argument("--profile", default=None, help="Solver profile from the solver configuration file")
    common.add_argument("--config", default=None, help="Replay a run from its config.json snapshot")
    common.add_argument("--out", default=None, help=f"Output directory (default: {DEFAULT_OUT})")
    common.add_argument("--strict", action="store_true", help="Exit 3 when a result is flagged")
    common.add_argument("--log-level", default=None, help="Log level for this run (overrides LOGGING_LEVEL)")

    parser = argparse.ArgumentParser(prog="tollgrid", description="Mixed-autonomy routing games: optima, "
                                                                   "equilibria and link pricing.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Builds the RunConfig from the flags, or from a snapshot when --config is given.
    """
    if args.config:
        overridden = [f"--{name}" for name in SNAPSHOT_FIELDS if getattr(args, name) is not None]
        if overridden:
            raise UsageError(f"--config replays a snapshot and cannot be combined with {', '.join(overridden)}")
        snapshot = RunConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
        if snapshot.command != args.command:
            raise UsageError(f"snapshot was written by '{snapshot.command}', not '{args.command}'")
        updates = {"out": args.out} if args.out else {}
        if args.strict:
            updates["strict"] = True
        config = snapshot.model_copy(update=updates)
        if file_digest(Path(config.network)) != config.network_sha256:
            log.warning("Network file %s changed since the snapshot was written", config.network)
        return config

    if args.network:
        network = args.network
    elif args.command == "reproduce-example1":
        network = str(EXAMPLE1_NETWORK)
    else:
        raise UsageError(f"{args.command} requires --network")

    profile_name = args.profile or (REPRODUCE_PROFILE if args.command == "reproduce-example1" else None)
    profile = SolverOptionsFactory.get_profile(profile_name)
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    options = SolverOptionsFactory.with_overrides(profile, seed=seed, tol=args.tol, restarts=args.restarts,
                                                  budget=args.budget)
    try:
        digest = file_digest(Path(network))
    except OSError:
        digest = ""
    return RunConfig(
        command=args.command,
        network=network,
        network_sha256=digest,
        profile=profile_name or SolverOptionsFactory.default_profile_name(),
        seed=seed,
        prices=args.prices,
        strict=args.strict,
        out=args.out or DEFAULT_OUT,
        options=options,
    )


def so_flow_frame(paths: PathSet, solution: SoSolution) -> pd.DataFrame:
    return pd.DataFrame({
        "od_id": [path.od_id for path in paths.paths],
        "path": ["-".join(path.links) for path in paths.paths],
        "fh": solution.flow.fh,
        "fa": solution.flow.fa,
        "total": solution.flow.total,
    })


def equilibria_frame(net: Network, results: Sequence[EquilibriumResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        row = {
            "restart": result.seed,
            "converged": result.converged,
            "duplicate_of": "" if result.duplicate_of is None else result.duplicate_of,
            "gap": result.gap,
            "normalized_gap": result.normalized_gap,
            "social_delay": result.social_delay,
            "total_cost": result.total_cost,
            "iterations": result.iterations,
        }
        for link, flow_h, flow_a in zip(net.links, result.link_flow.fh, result.link_flow.fa):
            row[f"fh_{link.id}"] = flow_h
            row[f"fa_{link.id}"] = flow_a
        rows.append(row)
    return pd.DataFrame(rows)


class CommandRunner:
    """
    Runs one subcommand; every handler returns (summary lines, summary dict, flagged).
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.options = config.options
        self.network = load_network(Path(config.network))
        self.paths = enumerate_paths(self.network)
        self.writer = ArtifactWriter(Path(config.out), config.config_hash())
        self.handlers: Dict[str, Callable[[], tuple]] = {
            "solve-so": self.solve_so,
            "solve-ue": self.solve_ue,
            "price": self.price,
            "pipeline": self.pipeline,
            "certify": self.certify,
            "undiff-mpec": self.undiff_mpec,
            "compare": self.compare,
            "reproduce-example1": self.reproduce_example1,
        }

    def prices_from_flag(self) -> Optional[PriceVector]:
        """
        None for 'marginal' (or no flag on certify); zeros for 'none'; else the CSV.
        """
        value = self.config.prices
        if value is None or value.lower() == "marginal":
            return None
        if value.lower() == "none":
            return PriceVector.zeros(self.network)
        return load_price_vector(value, self.network)

    def solve_so(self):
        solution = solve_social_optimum(self.network, self.paths, self.options.so)
        self.writer.write_csv("so_flow.csv", so_flow_frame(self.paths, solution))
        summary = {
            "social_delay": solution.objective,
            "kkt_residual": solution.kkt_residual,
            "converged": solution.converged,
            "restart_index": solution.restart_index,
            "restarts": solution.restarts_used,
            "restart_objectives": list(solution.restart_objectives),
        }
        lines = [
            f"J* = {solution.objective:.6f}",
            f"KKT residual = {solution.kkt_residual:.3e}",
            f"best restart = {solution.restart_index} of {solution.restarts_used} (converged: {solution.converged})",
        ]
        return lines, summary, not solution.converged

    def solve_ue(self):
        tau = self.prices_from_flag()
        if tau is None:
            tau = PriceVector.zeros(self.network)
        results = solve_equilibrium(self.network, self.paths, tau, self.options.ue)
        self.writer.write_csv("equilibria.csv", equilibria_frame(self.network, results))
        converged = [result for result in results if result.converged]
        delays = [result.social_delay for result in converged]
        summary = {
            "restarts": len(results),
            "converged": len(converged),
            "distinct": sum(1 for result in results if result.duplicate_of is None),
            "dedup_distance": self.options.ue.dedup_distance,
            "scaled_load_spread": scaled_load_spread(self.network, converged),
            "min_social_delay": min(delays, default=float("nan")),
            "max_social_delay": max(delays, default=float("nan")),
        }
        lines = [
            f"equilibria converged: {summary['converged']} / {summary['restarts']} ({summary['distinct']} distinct "
            f"at link-flow distance {summary['dedup_distance']:g}, limited by tol {self.options.ue.tol:g})",
            f"spread of fh + mu*fa over converged equilibria: {summary['scaled_load_spread']:.3e}",
            f"social delay: min {summary['min_social_delay']:.6f}, max {summary['max_social_delay']:.6f}",
        ]
        return lines, summary, len(converged) < len(results)

    def price(self):
        solution = solve_social_optimum(self.network, self.paths, self.options.so)
        tau = marginal_prices(self.network, self.paths, solution.flow)
        structure = check_price_structure(self.network, tau)
        self.writer.write_csv("so_flow.csv", so_flow_frame(self.paths, solution))
        self.writer.write_csv("prices.csv", price_vector_frame(self.network, tau))
        summary = {
            "social_delay": solution.objective,
            "converged": solution.converged,
            "price_structure": structure.status,
            "price_structure_deviation": structure.max_deviation,
        }
        lines = [f"J* = {solution.objective:.6f}",
                 f"price structure tau_a = mu*tau_h: {structure.status} (deviation {structure.max_deviation:.3e})"]
        lines += [f"link {link.id}: tau_h = {tau_h:.6f}, tau_a = {tau_a:.6f}"
                  for link, tau_h, tau_a in zip(self.network.links, tau.tau_h, tau.tau_a)]
        return lines, summary, not solution.converged

    def pipeline(self):
        result = price_pipeline(self.network, self.options.pipeline, self.paths)
        self.writer.write_csv("so_flow.csv", so_flow_frame(self.paths, result.fstar))
        self.writer.write_csv("prices.csv", price_vector_frame(self.network, result.tau))
        self.writer.write_csv("equilibria.csv", equilibria_frame(self.network, result.equilibria))
        return result.summary.lines(), result.summary.to_dict(), not result.summary.passed

    def certificate(self) -> tuple:
        tau = self.prices_from_flag()
        if tau is None:
            result = price_pipeline(self.network, self.options.pipeline, self.paths)
            tau, equilibria = result.tau, result.equilibria
            self.writer.write_csv("prices.csv", price_vector_frame(self.network, tau))
        else:
            equilibria = solve_equilibrium(self.network, self.paths, tau, self.options.ue)
        self.writer.write_csv("equilibria.csv", equilibria_frame(self.network, equilibria))
        report: CertificateReport = certify_social_delay_uniqueness(self.network, self.paths, tau, equilibria)
        self.writer.write_csv("certificate.csv", report.to_frame())
        return report

    def certify(self):
        report = self.certificate()
        summary = {"certificate": report.status, "reason": report.reason, "equilibria": report.equilibria,
                   "skipped": list(report.skipped)}
        return report.lines(), summary, not report.passed

    def undiff_mpec(self):
        result = solve_undiff_mpec(self.network, self.paths, self.options.mpec, self.options.so)
        self.writer.write_csv("mpec_trace.csv", result.trace_frame())
        self.writer.write_csv("prices.csv", price_vector_frame(self.network, result.best_tau))
        summary = {
            "best_social_delay": result.best_social_delay,
            "differentiated_optimum": result.reference_optimum,
            "best_tau": result.best_tau.tau_h.tolist(),
            "evaluations": result.evaluations,
            "inner_solves": result.inner_solves,
            "tau_max": result.tau_max,
            "widenings": result.widenings,
            "budget_exhausted": result.budget_exhausted,
        }
        lines = [
            f"best undifferentiated social delay = {result.best_social_delay:.6f}",
            f"differentiated optimum J* = {result.reference_optimum:.6f}",
            f"best tau = {np.array2string(result.best_tau.tau_h, precision=6)}",
            f"price vectors evaluated = {result.evaluations}, inner solves = {result.inner_solves}",
            f"budget exhausted = {result.budget_exhausted}",
        ]
        return lines, summary, result.budget_exhausted

    def comparison(self):
        comparison = compare_pricing_regimes(self.network, self.options, self.paths)
        self.writer.write_csv("comparison.csv", comparison.to_frame())
        self.writer.write_csv("mpec_trace.csv", comparison.mpec.trace_frame())
        self.writer.write_csv("prices.csv", price_vector_frame(self.network, comparison.pipeline.tau))
        self.writer.write_csv("so_flow.csv", so_flow_frame(self.paths, comparison.pipeline.fstar))
        flagged = comparison.mpec.budget_exhausted or not comparison.pipeline.summary.passed
        return comparison, flagged

    def compare(self):
        comparison, flagged = self.comparison()
        summary = {"optimum": comparison.optimum,
                   "rows": comparison.to_frame().to_dict(orient="records")}
        return comparison.to_text().splitlines(), summary, flagged

    def reproduce_example1(self):
        comparison, flagged = self.comparison()
        pipeline = comparison.pipeline
        report = certify_social_delay_uniqueness(self.network, self.paths, pipeline.tau, pipeline.equilibria)
        self.writer.write_csv("certificate.csv", report.to_frame())
        self.writer.write_csv("equilibria.csv", equilibria_frame(self.network, pipeline.equilibria))
        undiff = comparison.mpec.best_social_delay
        summary = {
            "optimum": comparison.optimum,
            "undifferentiated": undiff,
            "undifferentiated_row": comparison.row(UNDIFFERENTIATED).min_social_delay,
            "certificate": report.status,
            "pipeline": pipeline.summary.to_dict(),
        }
        lines = [
            f"J* (differentiated optimum)      = {comparison.optimum:.4f}",
            f"best undifferentiated            = {undiff:.4f}",
            f"undifferentiated exceeds optimum = {undiff > comparison.optimum}",
            f"social-delay certificate         = {report.status}",
            "",
        ] + pipeline.summary.lines() + [""] + comparison.to_text().splitlines()
        return lines, summary, flagged or not report.passed

    def execute(self) -> bool:
        """
        Runs the subcommand, writes config.json / summary.txt / summary.json and returns the flag.
        """
        self.writer.write_json("config.json", self.config.model_dump(mode="json"))
        lines, summary, flagged = self.handlers[self.config.command]()
        summary = {"command": self.config.command, "config_hash": self.writer.config_hash, "flagged": flagged,
                   **summary}
        banner = "=" * 69
        lines = [banner, f"tollgrid {self.config.command} on {self.config.network}", banner] + lines
        self.writer.write_text("summary.txt", lines)
        self.writer.write_json("summary.json", summary)
        print("\n".join(lines))
        if flagged:
            log.warning("Run flagged: see %s", self.writer.path("summary.txt"))
        return flagged


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parses ``argv`` and runs one subcommand; returns the process exit status.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    try:
        config = resolve_config(args)
    except UsageError as exception:
        parser.print_usage(sys.stderr)
        log.error("%s", exception)
        return EXIT_USAGE
    except (TollgridError, ValidationError, ValueError, OSError) as exception:
        log.error("Invalid run configuration: %s", exception)
        return EXIT_INPUT_ERROR

    if args.log_level:
        set_level(args.log_level)

    run_log = None
    try:
        run_log = attach_run_log(Path(config.out))
        flagged = CommandRunner(config).execute()
    except (TollgridError, ValidationError, ValueError, OSError) as exception:
        log.error("%s failed: %s", config.command, exception)
        return EXIT_INPUT_ERROR
    finally:
        if run_log is not None:
            detach_run_log(run_log)

    return EXIT_FLAGGED if flagged and config.strict else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
