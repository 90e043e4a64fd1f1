"""Uniform time grids shared by the Riccati, moment, and particle solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into `steps` intervals (steps + 1 nodes)."""

    T: float
    steps: int
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.T <= 0.0:
            raise StructuralError(f"horizon must be positive, got T={self.T}")
        if self.steps < 2:
            raise StructuralError(f"need at least 2 steps, got {self.steps}")
        object.__setattr__(self, "times", np.linspace(0.0, self.T, self.steps + 1))

    @property
    def h(self) -> float:
        return self.T / self.steps

    @property
    def n_nodes(self) -> int:
        return self.steps + 1

    def require_even(self) -> None:
        """Simpson quadrature needs an even interval count."""
        if self.steps % 2 != 0:
            raise StructuralError(
                f"Simpson quadrature needs an even step count, got {self.steps}"
            )

    def matches(self, other: "TimeGrid") -> bool:
        return self.steps == other.steps and abs(self.T - other.T) <= 1e-12 * (1.0 + abs(self.T))

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T, self.steps * factor)
