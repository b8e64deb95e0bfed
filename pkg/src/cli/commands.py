# src/cli/commands.py

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from src.application.estimation_service import EstimationService
from src.domain.exceptions import InfeasibleScenarioError, TrafficEstimationError
from src.domain.problem import SolveStatus
from src.domain.scenario import ObjectiveKind, ObjectiveSpec
from src.infrastructure.io.results import (
    write_density_csv,
    write_density_matrix,
    write_family_histogram,
    write_travel_time_reports,
)
from src.infrastructure.io.scenario_loader import load_scenario, write_scenario
from src.infrastructure.simulation.godunov import (
    bottleneck_run,
    oracle_scenario,
    random_free_flow_run,
    write_run_csv,
)
from src.infrastructure.solver.lp_format import export_lp_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def exit_code_for(status: SolveStatus) -> int:
    if status is SolveStatus.OPTIMAL:
        return EXIT_OK
    if status is SolveStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    if status is SolveStatus.ITERATION_LIMIT:
        return EXIT_LIMIT
    return EXIT_ERROR


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


# -----------------------------
# Commands
# -----------------------------
def cmd_estimate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "solver.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        scenario = load_scenario(args.scenario)
        resolution = (args.resolution, args.resolution) if args.resolution else None
        result = EstimationService().estimate(scenario, resolution)

        for link_id, density in result.density_maps.items():
            write_density_csv(density, out / f"density_{link_id}.csv")
            write_density_matrix(density, out / f"density_{link_id}_matrix.csv")
        write_travel_time_reports(result.travel_times, out / "travel_times.txt", out / "travel_times.json")
        logger.info("Estimation artifacts written to %s", out)
        return exit_code_for(result.solution.status)
    finally:
        root.removeHandler(handler)
        handler.close()


def cmd_bound(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    spec = ObjectiveSpec(kind=ObjectiveKind(args.objective))
    bounds = EstimationService().bound_objective(scenario, spec)
    low, high = bounds.interval
    print(f"[{low:.6f}, {high:.6f}]" if low is not None and high is not None else "[unknown, unknown]")
    return max(exit_code_for(bounds.minimum.status), exit_code_for(bounds.maximum.status))


def cmd_simulate(args: argparse.Namespace) -> int:
    if not args.oracle:
        logger.error("Only oracle runs are available; pass --oracle")
        return EXIT_ERROR
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.bottleneck:
        run = bottleneck_run(
            k_max=args.space_blocks - 1,
            n_max=args.time_blocks - 1,
            cells_per_block=args.cells_per_block,
        )
        name = "oracle-bottleneck"
    else:
        run = random_free_flow_run(
            seed=args.seed,
            k_max=args.space_blocks - 1,
            n_max=args.time_blocks - 1,
            cells_per_block=args.cells_per_block,
        )
        name = f"oracle-{args.seed}"
    scenario = oracle_scenario(run, relative_error=args.error, name=name)
    write_scenario(scenario, out)
    write_run_csv(run, out / "run.csv")
    truth = float(run.rho_ini_blocks().sum() * run.geometry.X)
    print(f"ground-truth initial vehicles: {truth:.6f}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    estimation = EstimationService().assemble_problem(scenario)
    path = export_lp_file(estimation.problem, args.lp)
    write_family_histogram(estimation.problem, f"{path}.families.csv")
    return EXIT_OK


# -----------------------------
# Parser
# -----------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Traffic state estimation with Lax-Hopf value conditions and mixed-integer programming.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    estimate = sub.add_parser("estimate", help="solve a scenario and write density maps and travel times")
    estimate.add_argument("--scenario", required=True)
    estimate.add_argument("--out", required=True)
    estimate.add_argument("--resolution", type=int, default=None)
    estimate.add_argument("--verbose", action="store_true")
    estimate.set_defaults(handler=cmd_estimate)

    bound = sub.add_parser("bound", help="print [min, max] of an objective")
    bound.add_argument("--scenario", required=True)
    bound.add_argument("--objective", choices=[ObjectiveKind.INITIAL_VEHICLES.value], default="initial-vehicles")
    bound.add_argument("--verbose", action="store_true")
    bound.set_defaults(handler=cmd_bound)

    simulate = sub.add_parser("simulate", help="write a synthetic scenario from a Godunov run")
    simulate.add_argument("--oracle", action="store_true")
    simulate.add_argument("--bottleneck", action="store_true", help="congested run behind an exit bottleneck")
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--space-blocks", type=int, default=9)
    simulate.add_argument("--time-blocks", type=int, default=20)
    simulate.add_argument("--cells-per-block", type=int, default=4)
    simulate.add_argument("--error", type=float, default=0.01)
    simulate.add_argument("--verbose", action="store_true")
    simulate.set_defaults(handler=cmd_simulate)

    export = sub.add_parser("export", help="write the assembled problem as an LP file")
    export.add_argument("--scenario", required=True)
    export.add_argument("--lp", required=True)
    export.add_argument("--verbose", action="store_true")
    export.set_defaults(handler=cmd_export)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except InfeasibleScenarioError as exc:
        logger.error("%s", exc)
        return EXIT_INFEASIBLE
    except TrafficEstimationError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR
