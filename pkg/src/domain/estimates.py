# src/domain/estimates.py

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class DensityMap:
    """Densities of one link on a (time x position) grid."""

    link_id: str
    times: np.ndarray
    positions: np.ndarray
    rho: np.ndarray
    clamped: int = 0
    clamp_magnitude: float = 0.0

    @property
    def resolution(self) -> tuple[int, int]:
        return self.rho.shape

    def to_frame(self) -> pd.DataFrame:
        t, x = np.meshgrid(self.times, self.positions, indexing="ij")
        return pd.DataFrame({"t": t.ravel(), "x": x.ravel(), "rho": self.rho.ravel()})

    def to_matrix(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rho, index=self.times, columns=self.positions)
        frame.index.name = "t"
        return frame


@dataclass(frozen=True)
class TravelTimeEstimate:
    t0: float
    tf: float | None
    route: tuple[str, ...]
    censored: bool = False

    @property
    def duration(self) -> float | None:
        return None if self.tf is None else self.tf - self.t0
