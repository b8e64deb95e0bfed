from pathlib import Path
import argparse
import sys

# Allow running as: python scripts/generate_oracle_scenario.py
ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from src.infrastructure.io.scenario_loader import write_scenario
from src.infrastructure.simulation.godunov import (
    density_snapshot,
    oracle_scenario,
    random_free_flow_run,
    sensor_series,
    write_run_csv,
)


def build_demo(seed: int, out: Path, error: float) -> None:
    run = random_free_flow_run(seed=seed, k_max=8, n_max=19, cells_per_block=4)
    geometry = run.geometry
    # One stationary sensor mid-link and one mid-horizon snapshot of the first block.
    sensor = sensor_series(run, edge=(geometry.k_max + 1) // 2, relative_error=error)
    snapshot = density_snapshot(run, n=geometry.n_max // 2, k=0, absolute_error=0.05)
    scenario = oracle_scenario(
        run,
        relative_error=error,
        name=f"oracle-demo-{seed}",
        sensors=[sensor],
        snapshots=[snapshot],
    )
    write_scenario(scenario, out)
    write_run_csv(run, out / "run.csv")

    truth = run.rho_ini_blocks().sum() * geometry.X
    print(f"Scenario written to {out}")
    print(f"Ground-truth initial vehicles: {truth:.3f}")


def main() -> None:
    parser = argparse.ArgumentParser(description="Write a synthetic free-flow scenario directory.")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=ROOT_DIR / "scenarios" / "oracle-demo")
    parser.add_argument("--error", type=float, default=0.01)
    args = parser.parse_args()
    build_demo(args.seed, args.out, args.error)


if __name__ == "__main__":
    main()
