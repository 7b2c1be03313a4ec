"""Objective values and adjoint-based gradients for the four subproblems.

All misfits are measured in the lumped discrete L2 norm (weight h per
node).  Decision variables are flat vectors: coefficient vectors for the
fitting and identification problems, stacked interior nodal values of both
control components for the discrimination problems.  Returned gradients
are plain partial derivatives with respect to those entries, so they match
central finite differences of the value directly; for control variables
this is h^2 times the L2-representer.

Each oracle keeps a one-slot cache of the forward states at the last
evaluated point, so a value-only call from a line search followed by a
gradient call at the accepted point pays the adjoint solves only once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import NumericalError
from .forward import FixedPointConfig, solve_adjoint, solve_semilinear
from .grid import NegLaplacian, field_from_interior, interior
from .nonlinearity import BasisCombo, MonomialBasis, unit_combo


class ObjectiveEval(NamedTuple):
    value: float
    grad: Optional[np.ndarray]


@dataclass(frozen=True)
class ControlBox:
    """Componentwise bounds eps_a <= eps(x) <= eps_b for admissible controls."""

    eps_a: tuple[float, float]
    eps_b: tuple[float, float]

    def __post_init__(self):
        a = np.asarray(self.eps_a, dtype=float)
        b = np.asarray(self.eps_b, dtype=float)
        if a.shape != (2,) or b.shape != (2,):
            raise ValueError("bounds must be pairs")
        if np.any(a > b):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "eps_a", tuple(a))
        object.__setattr__(self, "eps_b", tuple(b))

    def flat_bounds(self, grid) -> tuple[np.ndarray, np.ndarray]:
        """Bounds for the flat interior decision vector of a control."""
        m2 = (grid.n - 1) ** 2
        lo = np.repeat(np.asarray(self.eps_a), m2)
        hi = np.repeat(np.asarray(self.eps_b), m2)
        return lo, hi

    def contains(self, control: np.ndarray, tol: float = 1e-12) -> bool:
        a = np.asarray(self.eps_a)
        b = np.asarray(self.eps_b)
        c = interior(np.asarray(control))
        return bool(
            np.all(c >= a[:, None, None] - tol) and np.all(c <= b[:, None, None] + tol)
        )

    def sample_constant(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.eps_a, self.eps_b)


def control_to_vec(control: np.ndarray) -> np.ndarray:
    """Flatten the interior nodal values of a 2-component control."""
    return interior(np.asarray(control, dtype=float)).reshape(-1).copy()


def vec_to_control(grid, vec: np.ndarray) -> np.ndarray:
    """Rebuild a full control field (zero boundary ring) from a flat vector."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != 2 * (grid.n - 1) ** 2:
        raise ValueError("flat control vector does not match the grid")
    return field_from_interior(grid, vec)


def project_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Componentwise clamp of x onto [lo, hi]."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if x.shape != lo.shape or x.shape != hi.shape:
        raise ValueError("mismatched lengths in box projection")
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    return np.clip(x, lo, hi)


@dataclass(frozen=True, eq=False)
class SolverContext:
    """Grid operator, basis and physical constants shared by all objectives."""

    op: NegLaplacian
    basis: MonomialBasis
    gamma1: float
    gamma2: float
    fp: FixedPointConfig

    @property
    def grid(self):
        return self.op.grid

    def combo(self, coeffs) -> BasisCombo:
        return BasisCombo(self.gamma1, self.gamma2, basis=self.basis, coeffs=coeffs)

    def unit(self, position: int) -> BasisCombo:
        return unit_combo(self.basis, position, self.gamma1, self.gamma2)

    def solve(self, nonlin, eps) -> np.ndarray:
        state, report = solve_semilinear(self.op, nonlin, eps, self.fp)
        if not report.converged:
            raise NumericalError(
                f"fixed-point iteration stalled at E={report.final_residual:.3e}"
            )
        return state


def _misfit_sq(grid, diff: np.ndarray) -> float:
    # squared discrete L2 norm, h^2 * sum(diff^2)
    return grid.h**2 * float(np.sum(diff * diff))


def _coeff_misfit_grad(ctx: SolverContext, state, adjoint, k: int) -> np.ndarray:
    """<q, Phi_j(y)>_h for j < k, with Phi_j = (g1*phi_j, -g2*phi_j)."""
    y1 = interior(state[0])
    y2 = interior(state[1])
    mono = ctx.basis.monomials(y1, y2)[:k]
    r = ctx.gamma1 * interior(adjoint[0]) - ctx.gamma2 * interior(adjoint[1])
    return ctx.grid.h**2 * np.tensordot(mono, r, axes=([1, 2], [0, 1]))


class FittingObjective:
    """Coefficient-fitting problem for one candidate's target states.

    value(beta) = sum_m 1/2 ||y^{beta,eps_m} - target_m||_{L2}^2
                  + nu/2 ||beta||_2^2
    The gradient entry j is nu*beta_j plus the adjoint pairings of the
    lifted basis element j with each control's adjoint state.
    """

    def __init__(self, ctx: SolverContext, controls, targets, nu: float):
        if len(controls) == 0:
            raise ValueError("fitting needs at least one control")
        if len(controls) != len(targets):
            raise ValueError("controls and targets must pair up")
        self.ctx = ctx
        self.controls = list(controls)
        self.targets = list(targets)
        self.nu = float(nu)
        self._cache_key = None
        self._cache_states = None

    def _states(self, beta: np.ndarray):
        key = beta.tobytes()
        if key != self._cache_key:
            nonlin = self.ctx.combo(beta)
            self._cache_states = [
                self.ctx.solve(nonlin, eps) for eps in self.controls
            ]
            self._cache_key = key
        return self._cache_states

    def __call__(self, beta: np.ndarray, need_grad: bool = True) -> ObjectiveEval:
        beta = np.asarray(beta, dtype=float)
        states = self._states(beta)
        grid = self.ctx.grid
        value = 0.5 * self.nu * float(np.dot(beta, beta))
        for y, t in zip(states, self.targets):
            value += 0.5 * _misfit_sq(grid, y - t)
        if not need_grad:
            return ObjectiveEval(value, None)
        nonlin = self.ctx.combo(beta)
        grad = self.nu * beta.copy()
        for y, t in zip(states, self.targets):
            q = solve_adjoint(self.ctx.op, nonlin, y, -(y - t))
            grad += _coeff_misfit_grad(self.ctx, y, q, beta.size)
        return ObjectiveEval(value, grad)


class DiscriminationObjective:
    """Control-design objective separating a fitted surrogate from a candidate.

    In minimization form (the one whose gradient is nu*eps - (q_beta + q_cand)):

        J(eps) = -1/2 ||y^{beta,eps} - y^{cand,eps}||_{L2}^2
                 + reg_sign * nu/2 ||eps||_{L2}^2

    ``reg_sign=+1`` penalizes control energy; ``reg_sign=-1`` rewards it
    (the alternative convention in which the regularizer joins the
    maximized discrimination).  The initialization problem is the special
    case beta = () where the surrogate state is the plain Poisson solve.
    """

    def __init__(self, ctx: SolverContext, beta, candidate_pos: int, nu: float,
                 reg_sign: int = 1):
        if reg_sign not in (1, -1):
            raise ValueError("reg_sign must be +1 or -1")
        self.ctx = ctx
        self.beta = np.asarray(beta, dtype=float)
        self.candidate_pos = int(candidate_pos)
        self.nu = float(nu)
        self.reg_sign = reg_sign
        self.surrogate = ctx.combo(self.beta)
        self.candidate = ctx.unit(self.candidate_pos)
        self._cache_key = None
        self._cache = None

    def _states(self, vec: np.ndarray):
        key = vec.tobytes()
        if key != self._cache_key:
            eps = vec_to_control(self.ctx.grid, vec)
            y_b = self.ctx.solve(self.surrogate, eps)
            y_c = self.ctx.solve(self.candidate, eps)
            self._cache = (eps, y_b, y_c)
            self._cache_key = key
        return self._cache

    def __call__(self, vec: np.ndarray, need_grad: bool = True) -> ObjectiveEval:
        vec = np.asarray(vec, dtype=float)
        eps, y_b, y_c = self._states(vec)
        grid = self.ctx.grid
        diff = y_b - y_c
        value = -0.5 * _misfit_sq(grid, diff) + self.reg_sign * 0.5 * self.nu * _misfit_sq(grid, eps)
        if not need_grad:
            return ObjectiveEval(value, None)
        q_b = solve_adjoint(self.ctx.op, self.surrogate, y_b, diff)
        q_c = solve_adjoint(self.ctx.op, self.candidate, y_c, -diff)
        rep = self.reg_sign * self.nu * interior(eps) - interior(q_b) - interior(q_c)
        grad = grid.h**2 * rep.reshape(-1)
        return ObjectiveEval(value, grad)


def initialization_objective(ctx: SolverContext, candidate_pos: int, nu: float,
                             reg_sign: int = 1) -> DiscriminationObjective:
    """Discrimination against the zero nonlinearity (empty coefficient vector)."""
    return DiscriminationObjective(ctx, np.zeros(0), candidate_pos, nu, reg_sign)


class IdentificationObjective:
    """Final data-fitting problem over the full coefficient box.

    value(alpha) = sum_m ||y^{alpha,eps_m} - data_m||_{L2}^2, unregularized
    and without the 1/2 factor; the gradient folds the factor 2 into the
    adjoint right-hand sides.
    """

    def __init__(self, ctx: SolverContext, controls, data):
        if len(controls) == 0:
            raise ValueError("identification needs at least one control")
        if len(controls) != len(data):
            raise ValueError("controls and data must pair up")
        self.ctx = ctx
        self.controls = list(controls)
        self.data = list(data)
        self._cache_key = None
        self._cache_states = None

    def _states(self, alpha: np.ndarray):
        key = alpha.tobytes()
        if key != self._cache_key:
            nonlin = self.ctx.combo(alpha)
            self._cache_states = [self.ctx.solve(nonlin, eps) for eps in self.controls]
            self._cache_key = key
        return self._cache_states

    def __call__(self, alpha: np.ndarray, need_grad: bool = True) -> ObjectiveEval:
        alpha = np.asarray(alpha, dtype=float)
        states = self._states(alpha)
        grid = self.ctx.grid
        value = sum(_misfit_sq(grid, y - d) for y, d in zip(states, self.data))
        if not need_grad:
            return ObjectiveEval(value, None)
        nonlin = self.ctx.combo(alpha)
        grad = np.zeros(alpha.size)
        for y, d in zip(states, self.data):
            q = solve_adjoint(self.ctx.op, nonlin, y, -2.0 * (y - d))
            grad += _coeff_misfit_grad(self.ctx, y, q, alpha.size)
        return ObjectiveEval(value, grad)
