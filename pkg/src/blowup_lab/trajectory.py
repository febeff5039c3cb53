"""Tau-sampled trajectories of state fields.

A Trajectory is the discrete stand-in for a curve Phi: [0, tau_max] -> states,
stored as an array of stacked node values on a uniform tau grid.  The sup of
the H^{2k} norms over the sample grid is the discrete version of the norm on
the trajectory space (sup over tau > 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import StateField
from .discretize import DiscretizedOperator


@dataclass
class Trajectory:
    """States Phi(0), Phi(h), ..., Phi(Mh) as rows of a (M+1, 2n) array."""

    grid_nodes: np.ndarray
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values))
        if self.values.shape[1] != 2 * len(self.grid_nodes):
            raise ValueError("trajectory row length does not match the grid")

    @classmethod
    def zero(cls, grid_nodes: np.ndarray, h: float, n_steps: int) -> "Trajectory":
        return cls(grid_nodes, h, np.zeros((n_steps + 1, 2 * len(grid_nodes))))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def tau_max(self) -> float:
        return self.h * self.n_steps

    @property
    def taus(self) -> np.ndarray:
        return self.h * np.arange(self.values.shape[0])

    def state(self, m: int) -> StateField:
        return StateField.from_vector(self.grid_nodes, self.values[m].copy())

    def norms(self, op: DiscretizedOperator) -> np.ndarray:
        return op.norms_stacked(self.values.T)

    def x_norm(self, op: DiscretizedOperator) -> float:
        """sup_m ||Phi(mh)||_{H^{2k}}, the trajectory-space norm."""
        return float(np.max(self.norms(op)))

    def distance_x(self, other: "Trajectory", op: DiscretizedOperator) -> float:
        if other.values.shape != self.values.shape:
            raise ValueError("trajectories must share the tau grid")
        return float(np.max(op.norms_stacked((self.values - other.values).T)))

    def copy(self) -> "Trajectory":
        return Trajectory(self.grid_nodes, self.h, self.values.copy())

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.grid_nodes, self.h, self.values + other.values)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.grid_nodes, self.h, self.values - other.values)

    def __mul__(self, scalar) -> "Trajectory":
        return Trajectory(self.grid_nodes, self.h, scalar * self.values)

    __rmul__ = __mul__
