"""Pointwise and integral operators of the similarity-coordinate system.

The linearization around the self-similar solution is driven by the formal
operator

    L (u1, u2) = ( -rho u1' + u2' + p c0 int_0^rho u2,  u1' - rho u2' )

with domain condition u1(0) = 0, and the nonlinearity

    N(u) = ( sum_{j=2}^p C(p,j) c0^{(p-j)/(p-1)} rho * util(rho)^j,  0 ),

where util(rho) = rho^{-1} int_0^rho u2 is the sliding average of the second
component.  Differentiation and antidifferentiation are supplied as oracles
(typically the collocation matrices from `grids`), which keeps this module
free of any discretization choice.

The two Hardy-type checks compute both sides of the inequalities

    int |v|^2          <~  int x^{-(2k-2)} |d/dx (x^k v)|^2
    int |(u/x)^{(j)}|^2 <~ int |u^{(j+1)}|^2          (u(0) = 0)

used to control util.  The first right-hand side is integrated in the
algebraically equivalent regularized form |k v + x v'|^2; the raw integrand is
a 0/0 expression at x = 0 that double precision mangles.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .core import Parameters, StateField


class DomainError(ValueError):
    """Input field violates a domain condition (e.g. u1(0) != 0)."""


def _check_origin(values: np.ndarray, tol: float, what: str):
    scale = max(1.0, float(np.max(np.abs(values))))
    if abs(values[0]) > tol * scale:
        raise DomainError(f"{what}(0) = {values[0]!r} exceeds tolerance {tol:g} * {scale:g}")


def apply_L_formal(params: Parameters, u: StateField, diff, integrate,
                   bc_tol: float = 1e-9) -> StateField:
    """Apply the formal operator L on the sample grid.

    diff and integrate realize d/drho and int_0^rho on the grid (exactly for
    resolved polynomials).  Requires u1(0) = 0.
    """
    _check_origin(u.u1, bc_tol, "u1")
    rho = u.grid
    du1 = diff(u.u1)
    du2 = diff(u.u2)
    comp1 = -rho * du1 + du2 + params.p * params.c0 * integrate(u.u2)
    comp2 = du1 - rho * du2
    return StateField(rho, comp1, comp2)


def hardy_average(u2: np.ndarray, grid: np.ndarray, integrate) -> np.ndarray:
    """Sliding average util(rho) = rho^{-1} int_0^rho u2; util(0) = u2(0)."""
    u2 = np.asarray(u2)
    prim = integrate(u2)
    out = np.empty_like(prim)
    out[1:] = prim[1:] / grid[1:]
    out[0] = u2[0]
    return out


def apply_N(params: Parameters, u: StateField, integrate) -> StateField:
    """Nonlinearity N(u); first component only, second is identically zero."""
    rho = u.grid
    util = hardy_average(u.u2, rho, integrate)
    p, c0 = params.p, params.c0
    comp1 = np.zeros_like(util)
    power = util * util
    for j in range(2, p + 1):
        comp1 = comp1 + comb(p, j) * c0 ** ((p - j) / (p - 1)) * power
        power = power * util
    comp1 = rho * comp1
    return StateField(rho, comp1, np.zeros_like(comp1))


def hardy_check_part1(v: np.ndarray, k: int, x: np.ndarray, diff, weights):
    """Both sides of the weighted Hardy inequality for smooth v, weight power k.

    lhs = int_0^1 |v|^2, rhs = int_0^1 x^{-(2k-2)} |d/dx (x^k v)|^2 evaluated
    through the regularized integrand |k v + x v'|^2.
    """
    if k < 1:
        raise ValueError(f"weight power k must be >= 1, got {k}")
    v = np.asarray(v)
    lhs = float(weights @ np.abs(v) ** 2)
    reg = k * v + x * diff(v)
    rhs = float(weights @ np.abs(reg) ** 2)
    return lhs, rhs


def hardy_check_part2(u: np.ndarray, j: int, x: np.ndarray, diff, weights,
                      bc_tol: float = 1e-9):
    """Both sides of int |(u/x)^{(j)}|^2 <= C int |u^{(j+1)}|^2 for u(0) = 0.

    u/x is resolved on the grid with the origin value u'(0) (l'Hopital); for
    polynomial u of degree <= N this interpolant is exact.
    """
    if j < 0:
        raise ValueError(f"derivative order j must be >= 0, got {j}")
    u = np.asarray(u)
    _check_origin(u, bc_tol, "u")
    w = np.empty_like(u, dtype=np.result_type(u, float))
    w[1:] = u[1:] / x[1:]
    w[0] = diff(u)[0]
    dw = w
    for _ in range(j):
        dw = diff(dw)
    lhs = float(weights @ np.abs(dw) ** 2)
    du = u
    for _ in range(j + 1):
        du = diff(du)
    rhs = float(weights @ np.abs(du) ** 2)
    return lhs, rhs
