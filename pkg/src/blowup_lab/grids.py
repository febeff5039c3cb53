"""Chebyshev-Gauss-Lobatto collocation machinery on [0, 1].

Nodes, barycentric differentiation matrix, antiderivative matrix,
Clenshaw-Curtis weights and value<->coefficient transforms.  All matrices are
dense, sized for N <= ~130, and exact on polynomials of degree <= N up to
round-off.

High-order differentiation (the 2k-th derivative entering the Sobolev inner
product) is done in coefficient space with an explicit degree cutoff: the
derivative of mode M is amplified by roughly 4^k * prod_{j<2k}(M^2-j^2)/(2j+1)
(the sharp endpoint growth of Chebyshev derivatives on [0,1]), so retaining
modes with amplification beyond ~1e12 only injects noise in double precision.
`sobolev_cutoff` returns the largest safe degree for a given order; the cutoff
is part of the definition of the discrete norm and is recorded in run reports.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as nch


class GridError(ValueError):
    """Invalid collocation grid request."""


DERIVATIVE_NOISE_BUDGET = 1e12


def derivative_amplification(m: int, order: int) -> float:
    """Endpoint growth of the order-th derivative of Chebyshev mode m on [0,1]."""
    amp = 2.0 ** order
    for j in range(order):
        amp *= (m * m - j * j) / (2 * j + 1)
    return amp


def sobolev_cutoff(n: int, order: int, budget: float = DERIVATIVE_NOISE_BUDGET) -> int:
    """Largest degree whose order-th derivative stays within the round-off budget."""
    best = order + 1
    for m in range(order + 1, n + 1):
        if derivative_amplification(m, order) <= budget:
            best = m
        else:
            break
    return min(best, n)


class ChebyshevGrid:
    """Chebyshev-Lobatto points mapped affinely to [0, 1], ascending."""

    def __init__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 8:
            raise GridError(f"polynomial order N must be an integer >= 8, got {n!r}")
        self.n = int(n)
        i = np.arange(self.n + 1)
        # t in [-1, 1] ascending; x = (1 + t)/2 puts endpoints exactly at 0, 1
        self.t = -np.cos(np.pi * i / self.n)
        self.t[0], self.t[-1] = -1.0, 1.0
        if self.n % 2 == 0:
            self.t[self.n // 2] = 0.0
        self.nodes = 0.5 * (1.0 + self.t)

        self.diff = self._diff_matrix()
        self.vals_to_coef = self._vals_to_coef()
        self.coef_to_vals = nch.chebvander(self.t, self.n)
        self.antideriv = self._antideriv_matrix()
        self.weights = self._clenshaw_curtis()

    # -- construction ------------------------------------------------------

    def _diff_matrix(self) -> np.ndarray:
        """Barycentric differentiation matrix with negative-sum diagonal."""
        x = self.nodes
        b = np.ones(self.n + 1)
        b[1::2] = -1.0
        b[0] *= 0.5
        b[-1] *= 0.5
        dx = x[:, None] - x[None, :]
        np.fill_diagonal(dx, 1.0)
        d = (b[None, :] / b[:, None]) / dx
        np.fill_diagonal(d, 0.0)
        np.fill_diagonal(d, -d.sum(axis=1))
        return d

    def _vals_to_coef(self) -> np.ndarray:
        """DCT-I style transform from node values to Chebyshev-in-t coefficients."""
        n = self.n
        k = np.arange(n + 1)
        cbar = np.ones(n + 1)
        cbar[0] = cbar[-1] = 2.0
        # our node i sits at the reversed standard angle; T_k(-cos) picks up (-1)^k
        mat = np.cos(np.outer(k, k) * np.pi / n) * ((-1.0) ** k)[:, None]
        return (2.0 / n) * mat / np.outer(cbar, cbar)

    def _antideriv_matrix(self) -> np.ndarray:
        """Matrix J with (J u)_i ~= int_0^{x_i} u; exact for degree <= N."""
        c = nch.chebint(self.vals_to_coef, m=1, lbnd=-1.0, scl=0.5, axis=0)
        return nch.chebvander(self.t, self.n + 1) @ c

    def _clenshaw_curtis(self) -> np.ndarray:
        """Interpolatory quadrature weights for int_0^1 on the nodes."""
        k = np.arange(self.n + 1)
        mu = np.zeros(self.n + 1)
        even = k % 2 == 0
        mu[even] = 2.0 / (1.0 - k[even] ** 2)
        return 0.5 * (self.vals_to_coef.T @ mu)

    # -- operations --------------------------------------------------------

    def differentiate(self, values: np.ndarray) -> np.ndarray:
        return self.diff @ values

    def antiderivative(self, values: np.ndarray) -> np.ndarray:
        return self.antideriv @ values

    def integrate(self, values: np.ndarray) -> complex:
        return self.weights @ values

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        return self.vals_to_coef @ values

    def derivative_operator(self, order: int, cutoff: int | None = None) -> np.ndarray:
        """Node values -> order-th derivative of the degree<=cutoff interpolant.

        cutoff=None keeps every mode.  The chain-rule factor 2 per derivative
        accounts for the map [0,1] -> [-1,1].
        """
        if order == 0:
            return np.eye(self.n + 1)
        m = self.n if cutoff is None else min(cutoff, self.n)
        c = self.vals_to_coef[: m + 1, :]
        dc = nch.chebder(c, m=order, scl=2.0, axis=0)
        if dc.shape[0] == 0:
            return np.zeros((self.n + 1, self.n + 1))
        return nch.chebvander(self.t, dc.shape[0] - 1) @ dc

    def sample(self, fn) -> np.ndarray:
        return fn(self.nodes)


def build_grid(n: int) -> ChebyshevGrid:
    """Collocation grid of polynomial order N (N+1 nodes including 0 and 1)."""
    return ChebyshevGrid(n)
