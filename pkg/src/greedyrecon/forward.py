"""Forward and adjoint solves for the coupled semilinear system.

The discrete state equation is ``L y + g(y) = eps`` componentwise on the
interior nodes, with L the 5-point discretization of -Laplace and
homogeneous Dirichlet data.  It is solved by a relaxed fixed-point
iteration: the nonlinearity is frozen at the previous iterate, a Poisson
problem is solved, and the new iterate is a convex combination of old and
new.  The linearized adjoint system couples the two components through the
transposed pointwise Jacobian of g and is solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NumericalError
from .grid import DIRECT_SOLVE_MAX_N, NegLaplacian, field_from_interior, interior
from .nonlinearity import Nonlinearity


@dataclass(frozen=True)
class FixedPointConfig:
    """Relaxation weight, stopping tolerance and iteration cap.

    ``lambda_a = 1`` would freeze the iterate at the initial guess, so the
    admissible range is [0, 1).
    """

    lambda_a: float = 0.0
    tol2: float = 1e-10
    ell_max: int = 200

    def __post_init__(self):
        if not (0.0 <= self.lambda_a < 1.0):
            raise ValueError(f"lambda_a must be in [0, 1), got {self.lambda_a}")
        if self.tol2 <= 0:
            raise ValueError("tol2 must be positive")
        if self.ell_max < 1:
            raise ValueError("ell_max must be >= 1")


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    residual_history: list = field(default_factory=list)


def solve_semilinear(
    op: NegLaplacian,
    nonlin: Nonlinearity,
    eps: np.ndarray,
    cfg: FixedPointConfig,
) -> tuple[np.ndarray, SolveReport]:
    """Fixed-point solve of L y + g(y) = eps.

    Starts from the Poisson solve L y0 = eps, then repeats
    L y~ = eps - g(y_l), y_{l+1} = lambda_a*y_l + (1-lambda_a)*y~ until the
    update norm E = h*||y_{l+1} - y_l||_2 drops to tol2 or ell_max is hit.
    Returns the last iterate together with a report; non-convergence is the
    caller's decision, blow-up raises NumericalError.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (2,) + op.grid.shape:
        raise ValueError("control does not live on the operator's grid")
    h = op.grid.h
    y = op.solve(eps)
    history = []
    for ell in range(1, cfg.ell_max + 1):
        y_tilde = op.solve(eps - nonlin.g(y))
        y_new = cfg.lambda_a * y + (1.0 - cfg.lambda_a) * y_tilde
        if not np.all(np.isfinite(y_new)):
            raise NumericalError(f"fixed-point iterate blew up at iteration {ell}")
        err = h * float(np.linalg.norm((y_new - y).ravel()))
        history.append(err)
        y = y_new
        if err <= cfg.tol2:
            return y, SolveReport(ell, err, True, history)
    return y, SolveReport(cfg.ell_max, history[-1], False, history)


def coupled_linear_matrix(
    op: NegLaplacian, nonlin: Nonlinearity, state: np.ndarray, transpose: bool
) -> sp.csr_matrix:
    """2x2 block system L + J(state) (or J^T) on the interior nodes."""
    y1 = interior(state[0])
    y2 = interior(state[1])
    jac = nonlin.jacobian(y1, y2)
    j11 = sp.diags(jac[0, 0].ravel())
    j12 = sp.diags(jac[0, 1].ravel())
    j21 = sp.diags(jac[1, 0].ravel())
    j22 = sp.diags(jac[1, 1].ravel())
    if transpose:
        j12, j21 = j21, j12
    lap = op.matrix
    return sp.bmat([[lap + j11, j12], [j21, lap + j22]], format="csr")


def _solve_coupled(mat: sp.csr_matrix, b: np.ndarray, n: int) -> np.ndarray:
    if n <= DIRECT_SOLVE_MAX_N:
        try:
            q = spla.splu(mat.tocsc()).solve(b)
        except RuntimeError as exc:  # singular factorization
            raise NumericalError(f"coupled solve factorization failed: {exc}") from exc
    else:
        # J^T breaks symmetry, so use a stabilized Krylov method
        q, info = spla.gmres(mat, b, rtol=1e-12, atol=0.0, restart=100)
        if info != 0:
            raise NumericalError(f"gmres failed to converge (info={info})")
    return q


def solve_adjoint(
    op: NegLaplacian,
    nonlin: Nonlinearity,
    state: np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """Solve the linearized transposed system (L + J(state)^T) q = rhs.

    The pointwise 2x2 Jacobian blocks couple the components, so both are
    solved as one sparse system.  Relative residual is checked to 1e-9;
    failure (the coupled operator can lose definiteness where g is not
    monotone) raises NumericalError.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (2,) + op.grid.shape:
        raise ValueError("right-hand side does not live on the operator's grid")
    b = interior(rhs).reshape(2, -1).ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return op.grid.zero_field()
    mat = coupled_linear_matrix(op, nonlin, state, transpose=True)
    q = _solve_coupled(mat, b, op.grid.n)
    res = np.linalg.norm(mat @ q - b) / bnorm
    if not np.isfinite(res) or res > 1e-9:
        raise NumericalError(f"adjoint solve residual {res:.3e} too large")
    return field_from_interior(op.grid, q)
