"""Eigenstructure of the discretized operator: analytic targets, a
well-conditioned mode solver, spurious-mode filtering, the gauge mode g and
its dual functional.

L has the explicit point eigenvalues

    lambda_j^+ = 1 + 2/(p-1) - 2j,    lambda_j^- = -2p/(p-1) - 2j,

with polynomial eigenfunctions.  Writing u1 = sum a_n rho^n (odd n),
u2 = sum b_n rho^n (even n) -- the parity class of the state space -- the
eigenvalue problem reduces to the three-term recurrences

    lambda a_n = -n a_n + (n+1) b_{n+1} + (p c0 / n) b_{n-1}
    lambda b_n = -n b_n + (n+1) a_{n+1},

whose eigenfunctions terminate exactly at the analytic eigenvalues.  The raw
coefficient matrix is violently non-normal (entries ~n above the diagonal,
~1/n below), which is also why a dense eigensolve of the collocation matrix
loses the deeper eigenvalues: their condition numbers grow exponentially and
double precision returns them with O(1e-4) errors at N = 48.  Rescaling
a_n, b_n by sigma_n = (p c0)^{n/2} / n! balances the couplings to the constant
sqrt(p c0), leaving diag(-n) plus a bounded tridiagonal perturbation; the
balanced matrix delivers every analytic eigenvalue to machine precision and
its eigenvectors evaluate stably back to node values.  Two truncation depths
(tied to the coarse/fine grids) provide the refinement-stability filter, and
a dense eigensolve of the collocation matrix itself is kept as a diagnostic
census of the spurious modes.

The gauge mode g (eigenfunction at lambda_0^+, the instability generated by
shifting the blowup time) gets two companion objects:

* y0: the left eigenvector of the collocation matrix at lambda_0^+ (inverse
  iteration; normalized to y0 . g = 1).  The functional u -> y0 . u evaluates
  the expansion coefficient c_0^+(u) and annihilates every other mode at
  eigensolver precision, so the projection P u = (y0 . u) g commutes with the
  propagator to round-off.
* gauge_dual: the vector g* in the span of the 2k analytic modes j < k with
  (u_j | g*)_{H^{2k}} = delta_{j,(0,+)} -- the Riesz representation of c_0^+
  restricted to the resolved mode decomposition.  Since every j < k mode has
  degree below 2k, this pairing is quadrature-exact.

The two realizations agree on the resolved modes to the reported
`dual_agreement`; projections and the gauge correction use y0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly
from scipy.special import gammaln

from .core import Parameters, StateField
from .discretize import DiscretizedOperator


class SpectrumError(RuntimeError):
    """A mathematically mandatory eigenvalue could not be resolved."""


class GaugeDualError(RuntimeError):
    """Mode Gram matrix too ill-conditioned to build the dual vector."""


def analytic_eigenvalues(params: Parameters, j_max: int):
    """Exact eigenvalue pairs (lambda_j^+, lambda_j^-) for j = 0..j_max."""
    if j_max < 0:
        raise ValueError(f"j_max must be >= 0, got {j_max}")
    p = params.p
    return [(1.0 + 2.0 / (p - 1) - 2.0 * j, -2.0 * p / (p - 1) - 2.0 * j)
            for j in range(j_max + 1)]


def gauge_eigenvalue(params: Parameters) -> float:
    return 1.0 + 2.0 / (params.p - 1)


def balanced_recurrence_matrix(params: Parameters, q: int) -> np.ndarray:
    """Balanced parity-block coefficient matrix, degrees <= 2q+1.

    Slot 2i holds the (scaled) Taylor coefficient a_{2i+1} of u1, slot 2i+1
    holds b_{2i} of u2; the scaling sigma_n = (p c0)^{n/2}/n! turns all
    couplings into s = sqrt(p c0).
    """
    s = np.sqrt(params.p * params.c0)
    m = 2 * (q + 1)
    a = np.zeros((m, m))
    for i in range(q + 1):
        a[2 * i, 2 * i] = -(2 * i + 1)
        a[2 * i, 2 * i + 1] = s
        if i + 1 <= q:
            a[2 * i, 2 * (i + 1) + 1] = s
        a[2 * i + 1, 2 * i + 1] = -2 * i
        a[2 * i + 1, 2 * i] = s
    return a


def _balanced_eig(params: Parameters, q: int):
    """Eigenvalues and scaled-Taylor eigenvectors of the parity block."""
    w, v = scipy.linalg.eig(balanced_recurrence_matrix(params, q))
    return w, v


def _modes_to_nodes(params: Parameters, q: int, rho: np.ndarray, w, v):
    """Evaluate balanced eigenvectors as node values; returns (2n, m) array.

    The scaling sigma_n decays superexponentially, so round-off in the deep
    coefficient slots is annihilated and the evaluation is stable even for
    the highest-degree modes.
    """
    s = np.sqrt(params.p * params.c0)
    n = np.arange(2 * q + 2)
    sigma = np.exp(n * np.log(s) - gammaln(n + 1))
    out = np.empty((2 * len(rho), v.shape[1]))
    coef_a = np.zeros(2 * q + 2)
    coef_b = np.zeros(2 * q + 2)
    for i in range(v.shape[1]):
        vec = v[:, i].real if np.max(np.abs(v[:, i].imag)) < 1e-12 else None
        if vec is None:
            raise SpectrumError("unexpected complex eigenvector in the parity block")
        coef_a[:] = 0.0
        coef_b[:] = 0.0
        coef_a[1::2] = vec[0::2]
        coef_b[0::2] = vec[1::2]
        out[: len(rho), i] = npoly.polyval(rho, coef_a * sigma)
        out[len(rho):, i] = npoly.polyval(rho, coef_b * sigma)
    return out


@dataclass
class MatchedMode:
    j: int
    sign: str                  # '+' or '-'
    analytic: float
    computed: complex
    column: int
    nodal_residual: float      # ||Lmat v - lambda v|| / ||v|| on the main grid
    degree: int                # polynomial degree of the u1 component

    @property
    def label(self) -> str:
        return f"lambda_{self.j}^{self.sign}"


@dataclass
class SpectralDecomposition:
    """Resolved analytic eigensystem plus gauge projection data."""

    op: DiscretizedOperator
    eigenvalues: np.ndarray          # resolved (matched) eigenvalues
    vectors: np.ndarray              # (2n, m) node-value eigenvectors, unit H^{2k} norm
    matches: list
    gauge_index: int                 # column of lambda_0^+ in `vectors`
    y0: np.ndarray                   # left eigenvector at lambda_0^+, y0 . g = 1
    gauge_dual_vec: np.ndarray       # in-span Riesz vector for c_0^+
    cond_mode_gram: float
    dual_agreement: float            # max_j<k |y0 . u_j - (u_j|g*)|
    spurious_count: int              # nodal eigenvalues failing the two-grid filter
    spurious_max_re: float           # largest real part among them
    left_residual: float             # ||Lmat^T y0 - lambda_0 y0||

    @property
    def params(self) -> Parameters:
        return self.op.params

    @property
    def grid(self):
        return self.op.grid

    @property
    def gauge_vec(self) -> np.ndarray:
        return self.vectors[:, self.gauge_index]

    @property
    def gauge(self) -> StateField:
        return StateField.from_vector(self.grid.nodes, self.gauge_vec.copy())

    @property
    def gauge_dual(self) -> StateField:
        return StateField.from_vector(self.grid.nodes, self.gauge_dual_vec.copy())

    def matched(self, j: int, sign: str) -> MatchedMode:
        for m in self.matches:
            if m.j == j and m.sign == sign:
                return m
        raise KeyError(f"analytic mode lambda_{j}^{sign} not resolved")

    def mode_vec(self, j: int, sign: str) -> np.ndarray:
        return self.vectors[:, self.matched(j, sign).column]

    def mode_field(self, j: int, sign: str) -> StateField:
        return StateField.from_vector(self.grid.nodes, self.mode_vec(j, sign).copy())

    def c0plus(self, u, which: str = "spectral") -> complex:
        """Expansion coefficient of u along the gauge mode.

        which='spectral' pairs with the left eigenvector y0 (default),
        which='riesz' takes the H^{2k} inner product with g*.
        """
        vec = u.vector() if isinstance(u, StateField) else np.asarray(u)
        if which == "spectral":
            return complex(self.y0 @ vec)
        if which == "riesz":
            return complex(self.op.inner(vec, self.gauge_dual_vec))
        raise ValueError(f"unknown functional flavor {which!r}")

    def project_vec(self, vec: np.ndarray) -> np.ndarray:
        """P u = c_0^+(u) g; idempotent, kills every other resolved mode."""
        return (self.y0 @ vec) * self.gauge_vec

    def project(self, u: StateField) -> StateField:
        return StateField.from_vector(self.grid.nodes, self.project_vec(u.vector()))


def build_gauge_dual(op: DiscretizedOperator, mode_vectors: np.ndarray,
                     gauge_pos: int, cond_limit: float = 1e12):
    """Biorthogonal dual of the gauge mode within the given mode columns.

    Returns (g*, cond(Gram)).  g* lies in the column span and satisfies
    (u_i | g*)_{H^{2k}} = delta_{i, gauge_pos}; it vanishes on the discrete
    orthogonal complement of the span by construction.
    """
    m = mode_vectors.shape[1]
    gram = np.empty((m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            gram[a, b] = op.inner(mode_vectors[:, a], mode_vectors[:, b])
    cond = float(np.linalg.cond(gram))
    if cond > cond_limit:
        raise GaugeDualError(
            f"mode Gram condition number {cond:.3e} exceeds {cond_limit:.1e}; "
            "k or N too aggressive for this discretization")
    rhs = np.zeros(m, dtype=complex)
    rhs[gauge_pos] = 1.0
    sol = np.linalg.solve(gram, rhs)
    gstar = mode_vectors @ np.conj(sol)
    if np.max(np.abs(gstar.imag)) < 1e-12 * np.max(np.abs(gstar.real)):
        gstar = gstar.real
    return gstar, cond


def _left_gauge_vector(op: DiscretizedOperator, gauge_vec: np.ndarray,
                       lam0: float, iters: int = 4):
    """Left eigenvector at lambda_0^+ by inverse iteration on Lmat^T."""
    n2 = op.lmat.shape[0]
    shifted = (op.lmat - (lam0 + 1e-9) * np.eye(n2)).T
    lu = scipy.linalg.lu_factor(shifted)
    rng = np.random.default_rng(1234)
    y = rng.standard_normal(n2)
    for _ in range(iters):
        y = scipy.linalg.lu_solve(lu, y)
        y /= np.linalg.norm(y)
    residual = float(np.linalg.norm(op.lmat.T @ y - lam0 * y))
    pairing = y @ gauge_vec
    if abs(pairing) < 1e-8:
        raise SpectrumError("left gauge eigenvector is orthogonal to the gauge mode")
    return y / pairing, residual


def compute_spectrum(op: DiscretizedOperator, op_fine: DiscretizedOperator,
                     stability_tol: float = 1e-6,
                     match_tol: float = 1e-4) -> SpectralDecomposition:
    """Resolve the spectrum with a two-level stability filter.

    The balanced parity-block solver is run at the truncation depths of both
    grids; an eigenvalue is kept only if it moves by less than stability_tol
    under refinement, then matched greedily against the analytic families.
    A dense eigensolve of the collocation matrix itself supplies the spurious
    census (its deeper eigenvalues are exact in exact arithmetic but their
    condition numbers grow exponentially with depth; the balanced basis is
    what removes that amplification).  Failure to resolve lambda_0^+ raises
    SpectrumError: that eigenvalue is exact and must appear.
    """
    if op_fine.grid.n < 1.5 * op.grid.n:
        raise ValueError(
            f"refinement level N={op_fine.grid.n} must be >= 1.5 x N={op.grid.n}")
    params = op.params
    rho = op.grid.nodes
    q = op.grid.n // 2
    q_fine = op_fine.grid.n // 2

    w, v = _balanced_eig(params, q)
    w_fine, _ = _balanced_eig(params, q_fine)
    movement = np.min(np.abs(w[:, None] - w_fine[None, :]), axis=1)
    keep = movement < stability_tol
    kept_idx = np.where(keep)[0]
    if kept_idx.size == 0:
        raise SpectrumError("no eigenvalue survived the two-grid stability filter")

    nodal = _modes_to_nodes(params, q, rho, w[kept_idx], v[:, kept_idx])

    # match kept eigenvalues greedily to the analytic families
    targets = []
    for j, (lp, lm) in enumerate(analytic_eigenvalues(params, q + 1)):
        targets.append((j, "+", lp))
        targets.append((j, "-", lm))
    claimed = set()
    raw_matches = []
    for j, sign, lam in sorted(targets, key=lambda t: -t[2]):
        dist = np.abs(w[kept_idx] - lam)
        for pos in np.argsort(dist):
            if pos in claimed:
                continue
            if dist[pos] >= match_tol:
                break
            raw_matches.append((j, sign, lam, pos))
            claimed.add(int(pos))
            break

    lam0 = gauge_eigenvalue(params)
    gauge_hits = [m for m in raw_matches if m[0] == 0 and m[1] == "+"]
    if not gauge_hits:
        raise SpectrumError(
            f"gauge eigenvalue lambda_0^+ = {lam0} not resolved at N={op.grid.n}; "
            "this eigenvalue is exact for collocation, the discretization is faulty")

    # assemble matched columns, normalized to unit H^{2k} norm with a sign fix
    columns = []
    matches = []
    for col, (j, sign, lam, pos) in enumerate(raw_matches):
        vec = nodal[:, pos].copy()
        piv = vec[np.argmax(np.abs(vec))]
        vec = vec / piv
        nrm = op.norm(vec)
        if nrm == 0.0:
            continue
        vec /= nrm
        resid = float(np.linalg.norm(op.lmat @ vec - lam * vec))
        coefs = op.grid.coefficients(vec[: len(rho)])
        big = np.where(np.abs(coefs) > 1e-8 * np.max(np.abs(coefs)))[0]
        degree = int(big[-1]) if big.size else 0
        matches.append(MatchedMode(j, sign, lam, complex(w[kept_idx][pos]),
                                   len(columns), resid, degree))
        columns.append(vec)
    vectors = np.column_stack(columns)
    eigenvalues = np.array([m.computed for m in matches])
    gauge_index = next(m.column for m in matches if m.j == 0 and m.sign == "+")

    # spurious census from the dense collocation eigensolve
    w_nodal = scipy.linalg.eigvals(op.lmat)
    beta = op.boundary_eigenvalue
    w_nodal = w_nodal[np.abs(w_nodal - beta) > 1e-6 * max(1.0, abs(beta))]
    analytic_set = np.array([lam for _, _, lam in targets])
    dist_to_analytic = np.min(np.abs(w_nodal[:, None] - analytic_set[None, :]), axis=1)
    spurious = w_nodal[dist_to_analytic > match_tol]
    spurious_max_re = float(np.max(spurious.real)) if spurious.size else -np.inf

    y0, left_res = _left_gauge_vector(op, vectors[:, gauge_index], lam0)

    # in-span Riesz dual over the 2k modes j < k
    span_cols = []
    gauge_pos = 0
    for j in range(params.k):
        for sign in ("+", "-"):
            hit = [m for m in matches if m.j == j and m.sign == sign]
            if hit:
                if j == 0 and sign == "+":
                    gauge_pos = len(span_cols)
                span_cols.append(vectors[:, hit[0].column])
    gstar, cond_gram = build_gauge_dual(op, np.column_stack(span_cols), gauge_pos)

    agree = 0.0
    for vec in span_cols:
        a = complex(y0 @ vec)
        b = complex(op.inner(vec, gstar))
        agree = max(agree, abs(a - b))

    return SpectralDecomposition(
        op=op, eigenvalues=eigenvalues, vectors=vectors, matches=matches,
        gauge_index=int(gauge_index), y0=y0, gauge_dual_vec=np.asarray(gstar),
        cond_mode_gram=cond_gram, dual_agreement=float(agree),
        spurious_count=int(spurious.size), spurious_max_re=spurious_max_re,
        left_residual=left_res)
