# src/domain/geometry.py

from dataclasses import dataclass

from src.domain.exceptions import ParameterDomainError


@dataclass(frozen=True)
class LinkGeometry:
    """
    Space-time domain [xi, chi] x [0, t_max] of one link, tiled by
    k_max + 1 space blocks of length X and n_max + 1 time blocks of length T.
    """

    xi: float
    chi: float
    t_max: float
    k_max: int
    n_max: int

    def __post_init__(self) -> None:
        if not self.xi < self.chi:
            raise ParameterDomainError(
                f"Expected xi < chi, got xi={self.xi}, chi={self.chi}"
            )
        if not self.t_max > 0:
            raise ParameterDomainError(f"Horizon must be positive, got {self.t_max}")
        if self.k_max < 0 or self.n_max < 0:
            raise ParameterDomainError(
                f"Block counts must be non-negative, got k_max={self.k_max}, n_max={self.n_max}"
            )

    @property
    def length(self) -> float:
        return self.chi - self.xi

    @property
    def X(self) -> float:
        return self.length / (self.k_max + 1)

    @property
    def T(self) -> float:
        return self.t_max / (self.n_max + 1)

    @property
    def space_blocks(self) -> int:
        return self.k_max + 1

    @property
    def time_blocks(self) -> int:
        return self.n_max + 1

    @property
    def scale(self) -> float:
        """Characteristic magnitude used for relative tolerances."""
        return max(self.length, self.t_max)

    def x_edge(self, k: int) -> float:
        """Left edge of space block k; k = k_max + 1 gives chi."""
        if k == self.k_max + 1:
            return self.chi
        return self.xi + k * self.X

    def t_edge(self, n: int) -> float:
        """Start of time block n; n = n_max + 1 gives t_max."""
        if n == self.n_max + 1:
            return self.t_max
        return n * self.T

    def space_block_of(self, x: float) -> int:
        """Block containing x, left-closed; chi belongs to the last block."""
        k = int((x - self.xi) // self.X)
        return min(max(k, 0), self.k_max)

    def time_block_of(self, t: float) -> int:
        """Block containing t, left-closed; t_max belongs to the last block."""
        n = int(t // self.T)
        return min(max(n, 0), self.n_max)
