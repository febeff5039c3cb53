"""Collocation realization of L and of the H^{2k} inner product.

The operator acts on stacked node values (u1, u2) through the block matrix

    Lmat = [ -diag(rho) D,  D + p c0 J ]
           [       D,      -diag(rho) D ]

with the first row replaced by the boundary condition u1(0) = 0.  The
replacement row carries an inert eigenvalue far in the left half plane so the
constraint never contaminates the physical spectrum.

The inner product is the discrete analogue of

    (u|v) = sum_c int_0^1 u_c conj(v_c) + sum_c int_0^1 u_c^{(2k)} conj(v_c^{(2k)})

with Clenshaw-Curtis quadrature and the derivative evaluated through the
coefficient-space operator of `grids` with its noise cutoff (see module
docstring there; the cutoff degree is reported as `m_der`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Parameters, StateField
from .grids import ChebyshevGrid, sobolev_cutoff

# Eigenvalue assigned to the boundary-condition row; far from every physical
# mode, instantly decaying under the propagator.
BOUNDARY_EIGENVALUE = -1.0e3


@dataclass
class DiscretizedOperator:
    """Matrices realizing L and the H^{2k} product on one collocation grid."""

    params: Parameters
    grid: ChebyshevGrid
    lmat: np.ndarray
    sob_deriv: np.ndarray  # per-component 2k-th derivative (with cutoff)
    m_der: int
    boundary_eigenvalue: float = BOUNDARY_EIGENVALUE

    @property
    def n_nodes(self) -> int:
        return self.grid.n + 1

    def apply(self, u: StateField) -> StateField:
        return StateField.from_vector(u.grid, self.lmat @ u.vector())

    def _stack(self, u) -> np.ndarray:
        return u.vector() if isinstance(u, StateField) else np.asarray(u)

    def inner(self, u, v) -> complex:
        """Discrete (u|v)_{H^{2k}}; conjugate-symmetric, positive definite."""
        w = self.grid.weights
        uv = self._stack(u)
        vv = self._stack(v)
        n = self.n_nodes
        total = 0.0 + 0.0j
        for c in range(2):
            a = uv[c * n:(c + 1) * n]
            b = vv[c * n:(c + 1) * n]
            total += np.sum(w * a * np.conj(b))
            da = self.sob_deriv @ a
            db = self.sob_deriv @ b
            total += np.sum(w * da * np.conj(db))
        return complex(total)

    def norm(self, u) -> float:
        val = self.inner(u, u).real
        return float(np.sqrt(max(val, 0.0)))

    def norms_stacked(self, mat: np.ndarray) -> np.ndarray:
        """H^{2k} norms of the columns of a (2n, m) stack of state vectors."""
        w = self.grid.weights
        n = self.n_nodes
        total = np.zeros(mat.shape[1])
        for c in range(2):
            a = mat[c * n:(c + 1) * n, :]
            total += w @ (np.abs(a) ** 2)
            da = self.sob_deriv @ a
            total += w @ (np.abs(da) ** 2)
        return np.sqrt(np.maximum(total, 0.0))

    def gram(self) -> np.ndarray:
        """Dense Gram matrix G with (u|v) = v^H G u; Hermitian positive definite."""
        w = self.grid.weights
        block = np.diag(w) + self.sob_deriv.T @ (w[:, None] * self.sob_deriv)
        n = self.n_nodes
        g = np.zeros((2 * n, 2 * n))
        g[:n, :n] = block
        g[n:, n:] = block
        return g

    def parity_defect(self, u: StateField) -> float:
        """Largest violation of u1^{(2j)}(0) = u2^{(2j+1)}(0) = 0, j < k.

        Derivatives at the origin are read off truncated Chebyshev
        coefficients (same cutoff as the norm) and normalized by the field
        magnitude; smooth members of the discrete H^{2k} class sit at
        round-off level.
        """
        k = self.params.k
        cut = max(self.m_der, 2 * k + 2)
        scale = max(float(np.max(np.abs(u.u1))), float(np.max(np.abs(u.u2))), 1e-300)
        worst = 0.0
        for comp, orders in ((u.u1, range(0, 2 * k, 2)), (u.u2, range(1, 2 * k, 2))):
            for m in orders:
                dop = self.grid.derivative_operator(m, cutoff=cut)
                worst = max(worst, abs((dop @ comp)[0]) / scale)
        return worst


def discretize_L(params: Parameters, grid: ChebyshevGrid,
                 m_der: int | None = None,
                 boundary_eigenvalue: float = BOUNDARY_EIGENVALUE) -> DiscretizedOperator:
    """Assemble the block collocation matrix and the H^{2k} machinery."""
    n1 = grid.n + 1
    rho = grid.nodes
    d = grid.diff
    j = grid.antideriv
    rd = rho[:, None] * d

    lmat = np.zeros((2 * n1, 2 * n1))
    lmat[:n1, :n1] = -rd
    lmat[:n1, n1:] = d + params.p * params.c0 * j
    lmat[n1:, :n1] = d
    lmat[n1:, n1:] = -rd
    # boundary condition u1(0) = 0: replace, do not add
    lmat[0, :] = 0.0
    lmat[0, 0] = boundary_eigenvalue

    if m_der is None:
        m_der = sobolev_cutoff(grid.n, 2 * params.k)
    sob = grid.derivative_operator(2 * params.k, cutoff=m_der)
    return DiscretizedOperator(params, grid, lmat, sob, int(m_der), boundary_eigenvalue)


def sobolev_inner(op: DiscretizedOperator, u, v) -> complex:
    """Discrete H^{2k} inner product of two fields on op's grid."""
    if isinstance(u, StateField) and not np.array_equal(u.grid, op.grid.nodes):
        raise ValueError("field grid does not match the operator grid")
    if isinstance(v, StateField) and not np.array_equal(v.grid, op.grid.nodes):
        raise ValueError("field grid does not match the operator grid")
    return op.inner(u, v)


def sobolev_norm(op: DiscretizedOperator, u) -> float:
    return op.norm(u)
