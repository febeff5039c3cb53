"""Closed-form building blocks: the blowing-up reference solution, similarity
coordinates and two-component fields sampled on a radial grid.

The focusing wave equation psi_tt - Delta psi = psi^p (odd p >= 3, radial,
three space dimensions) has the spatially homogeneous solution

    psi_T(t) = c0^{1/(p-1)} (T - t)^{-2/(p-1)},   c0 = 2(p+1)/(p-1)^2,

blowing up at t = T.  Everything downstream studies perturbations of psi_T
inside the backward light cone of the blowup point (T, 0), in the coordinates
tau = -log(T - t), rho = r/(T - t), where the cone interior is rho in (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidExponent(ValueError):
    """Nonlinearity exponent must be an odd integer >= 3."""


class PastBlowup(ValueError):
    """Evaluation at or beyond the blowup time t = T."""


def compute_c0(p) -> float:
    """Amplitude constant 2(p+1)/(p-1)^2 of the self-similar solution."""
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)):
        raise InvalidExponent(f"exponent must be an integer, got {p!r}")
    if p < 3 or p % 2 == 0:
        raise InvalidExponent(f"exponent must be odd and >= 3, got {p}")
    return 2.0 * (p + 1) / (p - 1) ** 2


def k_min(p: int) -> int:
    """Smallest Sobolev order for which the linear remainder decays fast enough.

    The remainder of the mode expansion evolves no faster than
    exp((1/2 + p*c0 - 2k) tau); after the -2/(p-1) rescaling the nonlinear
    argument needs that exponent at or below -1, i.e.
    1/2 + p*c0 - 2k - 2/(p-1) <= -1.
    """
    c0 = compute_c0(p)
    return math.ceil((1.5 + p * c0 - 2.0 / (p - 1)) / 2.0)


@dataclass(frozen=True)
class Parameters:
    """Problem parameters: exponent p, blowup time T, Sobolev order k.

    k defaults to k_min(p).  Smaller k is allowed for plain L2-plus-derivative
    experiments, but the decay machinery (propagator estimates, the fixed
    point) assumes k >= k_min(p).
    """

    p: int
    T: float = 1.0
    k: int = None  # type: ignore[assignment]

    def __post_init__(self):
        compute_c0(self.p)  # validates p
        if not (self.T > 0):
            raise ValueError(f"blowup time T must be positive, got {self.T}")
        k = self.k if self.k is not None else k_min(self.p)
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
            raise ValueError(f"Sobolev order k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(k))

    @property
    def c0(self) -> float:
        return compute_c0(self.p)

    @property
    def shift(self) -> float:
        """Offset 2/(p-1) between L and the generator of the rescaled semigroup."""
        return 2.0 / (self.p - 1)

    @property
    def meets_decay_order(self) -> bool:
        return self.k >= k_min(self.p)


def fundamental_solution(params: Parameters, t, r=0.0):
    """psi_T(t, r) = c0^{1/(p-1)} (T-t)^{-2/(p-1)}; independent of r."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= params.T):
        raise PastBlowup(f"t={t} is not below the blowup time T={params.T}")
    val = params.c0 ** (1.0 / (params.p - 1)) * (params.T - t) ** (-2.0 / (params.p - 1))
    return val[()] if val.ndim == 0 else val


def to_similarity(T: float, t, r):
    """(t, r) -> (tau, rho) with tau = -log(T-t), rho = r/(T-t)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t >= T):
        raise PastBlowup(f"similarity coordinates undefined at t={t} >= T={T}")
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    tau = -np.log(T - t)
    rho = r / (T - t)
    return tau[()] if tau.ndim == 0 else tau, rho[()] if rho.ndim == 0 else rho


def from_similarity(T: float, tau, rho):
    """Inverse map: (tau, rho) -> (t, r) = (T - e^{-tau}, rho e^{-tau})."""
    tau = np.asarray(tau, dtype=float)
    rho = np.asarray(rho, dtype=float)
    s = np.exp(-tau)
    t = T - s
    r = rho * s
    return t[()] if t.ndim == 0 else t, r[()] if r.ndim == 0 else r


@dataclass
class StateField:
    """Two-component field (u1, u2) sampled at ascending points rho in [0, 1].

    Represents a snapshot Phi(tau, .) of the first-order similarity-coordinate
    system; u1 plays the role of the rescaled time derivative, u2 of the
    rescaled space derivative.
    """

    grid: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.u1 = np.asarray(self.u1)
        self.u2 = np.asarray(self.u2)
        if self.u1.shape != self.grid.shape or self.u2.shape != self.grid.shape:
            raise ValueError(
                f"component shapes {self.u1.shape}, {self.u2.shape} do not match "
                f"grid shape {self.grid.shape}"
            )

    @classmethod
    def zero(cls, grid: np.ndarray) -> "StateField":
        z = np.zeros_like(np.asarray(grid, dtype=float))
        return cls(grid, z.copy(), z.copy())

    @classmethod
    def from_vector(cls, grid: np.ndarray, vec: np.ndarray) -> "StateField":
        n = len(grid)
        if vec.shape != (2 * n,):
            raise ValueError(f"stacked vector must have length {2 * n}, got {vec.shape}")
        return cls(grid, vec[:n].copy(), vec[n:].copy())

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    def copy(self) -> "StateField":
        return StateField(self.grid, self.u1.copy(), self.u2.copy())

    def __add__(self, other: "StateField") -> "StateField":
        return StateField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "StateField") -> "StateField":
        return StateField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar) -> "StateField":
        return StateField(self.grid, scalar * self.u1, scalar * self.u2)

    __rmul__ = __mul__
