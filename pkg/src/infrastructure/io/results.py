# src/infrastructure/io/results.py

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import pandas as pd

from src.domain.estimates import DensityMap, TravelTimeEstimate
from src.domain.problem import MilpProblem

logger = logging.getLogger(__name__)


def report_header() -> str:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return f"# generated {stamp}"


def _write_with_header(path: Path, body: str) -> Path:
    path.write_text(f"{report_header()}\n{body}", encoding="utf-8")
    return path


def write_density_csv(density: DensityMap, path: str | Path) -> Path:
    body = density.to_frame().to_csv(index=False, float_format="%.10g", lineterminator="\n")
    return _write_with_header(Path(path), body)


def write_density_matrix(density: DensityMap, path: str | Path) -> Path:
    body = density.to_matrix().to_csv(float_format="%.10g", lineterminator="\n")
    return _write_with_header(Path(path), body)


def write_family_histogram(problem: MilpProblem, path: str | Path) -> Path:
    frame = pd.DataFrame(
        list(problem.family_histogram().items()), columns=["family", "constraints"]
    )
    return _write_with_header(Path(path), frame.to_csv(index=False, lineterminator="\n"))


def _duration_text(estimate: TravelTimeEstimate) -> str:
    if estimate.censored:
        return "censored (vehicle not discharged within the horizon)"
    return f"{estimate.duration:.3f} s"


def write_travel_time_reports(
    estimates: Sequence[TravelTimeEstimate], text_path: str | Path, json_path: str | Path
) -> tuple[Path, Path]:
    lines = [f"t0={e.t0:.3f} s  route={'>'.join(e.route)}  travel_time={_duration_text(e)}" for e in estimates]
    text = _write_with_header(Path(text_path), "".join(f"{line}\n" for line in lines))

    payload = {
        "generated": report_header().removeprefix("# generated "),
        "travel_times": [
            {
                "t0": e.t0,
                "tf": e.tf,
                "duration": e.duration,
                "route": list(e.route),
                "censored": e.censored,
            }
            for e in estimates
        ],
    }
    machine = Path(json_path)
    machine.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote %d travel-time estimates to %s and %s", len(estimates), text, machine)
    return text, machine
