"""Uniform Cartesian grids on (-x_max, x_max)^2 and the 5-point Dirichlet Laplacian.

Fields live on the full (N+1) x (N+1) node set, stored as numpy arrays
indexed ``[i, j]`` for the node at ``(i*h - x_max, j*h - x_max)``.  The
boundary ring is pinned to zero in every stored field; linear algebra acts
on the (N-1)^2 interior nodes only.  Two-component fields are stacked along
a leading axis of length 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NumericalError

# sparse LU up to this many cells per side, conjugate gradient above
DIRECT_SOLVE_MAX_N = 128
CG_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """N x N uniform square-cell partition of (-x_max, x_max)^2.

    ``n`` is the number of cells per side (the node set is (n+1)^2) and
    ``h = 2*x_max/n`` the spacing.
    """

    n: int
    x_max: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 cells per side, got n={self.n}")
        if self.x_max <= 0:
            raise ValueError(f"x_max must be positive, got x_max={self.x_max}")

    @property
    def h(self) -> float:
        return 2.0 * self.x_max / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n + 1, self.n + 1)

    @property
    def interior_count(self) -> int:
        return (self.n - 1) ** 2

    def nodes1d(self) -> np.ndarray:
        """Node coordinates i*h - x_max along one axis, i = 0..n."""
        return np.arange(self.n + 1) * self.h - self.x_max

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.nodes1d()
        return np.meshgrid(x, x, indexing="ij")

    def zero_scalar(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zero_field(self) -> np.ndarray:
        return np.zeros((2,) + self.shape)

    def sample_scalar(self, fn) -> np.ndarray:
        """Sample fn(x1, x2) on the nodes and pin the boundary ring to zero."""
        x1, x2 = self.meshgrid()
        u = np.asarray(fn(x1, x2), dtype=float)
        set_boundary_zero(u)
        return u

    def sample_field(self, fn1, fn2) -> np.ndarray:
        return np.stack([self.sample_scalar(fn1), self.sample_scalar(fn2)])


def set_boundary_zero(field: np.ndarray) -> None:
    """Zero the boundary ring in place; works for (m,m) and (2,m,m) arrays."""
    field[..., 0, :] = 0.0
    field[..., -1, :] = 0.0
    field[..., :, 0] = 0.0
    field[..., :, -1] = 0.0


def interior(field: np.ndarray) -> np.ndarray:
    """View of the interior nodes (boundary ring stripped)."""
    return field[..., 1:-1, 1:-1]


def field_from_interior(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Embed interior node values into a full field with zero boundary."""
    m = grid.n - 1
    if values.size % (m * m) != 0:
        raise ValueError("interior data does not match the grid")
    ncomp = values.size // (m * m)
    full = np.zeros((ncomp, grid.n + 1, grid.n + 1))
    full[:, 1:-1, 1:-1] = values.reshape(ncomp, m, m)
    return full[0] if ncomp == 1 else full


class NegLaplacian:
    """Five-point discretization of -Laplace with homogeneous Dirichlet data.

    On interior nodes the action is
    ``(4u_ij - u_{i-1,j} - u_{i+1,j} - u_{i,j-1} - u_{i,j+1}) / h^2``
    with missing neighbours treated as zero.  The interior matrix is
    symmetric positive definite; systems are solved by a cached sparse LU
    factorization for n <= 128 and by conjugate gradients above.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        m = grid.n - 1
        h2 = grid.h**2
        ones = np.ones(m)
        t = sp.diags([-ones[:-1], 2.0 * ones, -ones[:-1]], (-1, 0, 1), format="csr")
        eye = sp.identity(m, format="csr")
        self.matrix = (sp.kron(t, eye) + sp.kron(eye, t)).tocsr() / h2

    @cached_property
    def _lu(self):
        return spla.splu(self.matrix.tocsc())

    def apply(self, field: np.ndarray) -> np.ndarray:
        """Apply the operator to a full field; returns a full field (zero boundary)."""
        u = np.asarray(field, dtype=float)
        out = np.zeros_like(u)
        c = u[..., 1:-1, 1:-1]
        out[..., 1:-1, 1:-1] = (
            4.0 * c
            - u[..., :-2, 1:-1]
            - u[..., 2:, 1:-1]
            - u[..., 1:-1, :-2]
            - u[..., 1:-1, 2:]
        ) / self.grid.h**2
        return out

    def _solve_interior(self, b: np.ndarray) -> np.ndarray:
        if self.grid.n <= DIRECT_SOLVE_MAX_N:
            return self._lu.solve(b)
        x, info = spla.cg(self.matrix, b, rtol=CG_RTOL, atol=0.0)
        if info != 0:
            raise NumericalError(f"conjugate gradient failed to converge (info={info})")
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve op(u) = rhs on interior nodes; boundary of u is zero.

        Accepts a scalar field (m, m) or a stacked pair (2, m, m) and solves
        componentwise.  Relative interior residual is checked to 1e-10.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[-2:] != self.grid.shape:
            raise ValueError("right-hand side does not live on the operator's grid")
        single = rhs.ndim == 2
        b = interior(rhs).reshape(-1 if single else (2, -1))
        if single:
            sols = self._solve_interior(b)[None, :]
            bs = b[None, :]
        else:
            sols = np.stack([self._solve_interior(b[k]) for k in range(2)])
            bs = b
        if not (np.all(np.isfinite(sols)) and np.all(np.isfinite(bs))):
            raise NumericalError("linear solve produced non-finite values")
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(sols.shape[0]):
                bnorm = np.linalg.norm(bs[k])
                if bnorm > 0:
                    res = np.linalg.norm(self.matrix @ sols[k] - bs[k]) / bnorm
                    if not np.isfinite(res) or res > 1e-9:
                        raise NumericalError(
                            f"linear solve residual {res:.3e} too large")
        out = field_from_interior(self.grid, sols if not single else sols[0])
        return out

    def norms(self, field: np.ndarray) -> dict[str, float]:
        """Discrete L2, H1-seminorm and Laplacian norms of a field."""
        return {
            "l2": l2_norm(self.grid, field),
            "h1": h1_norm(self.grid, field),
            "laplace": l2_norm(self.grid, self.apply(field)),
        }


def l2_norm(grid: Grid, field: np.ndarray) -> float:
    """Lumped discrete L2 norm h * ||values||_2 over all components."""
    return grid.h * float(np.linalg.norm(np.asarray(field).ravel()))


def inner_l2(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """Discrete L2 inner product h^2 * sum(u*v) over all components."""
    return grid.h**2 * float(np.vdot(np.asarray(u), np.asarray(v)))


def h1_norm(grid: Grid, field: np.ndarray) -> float:
    """Forward-difference gradient L2 norm.

    Per scalar component: sqrt(sum of squared node-to-node forward
    differences in both directions); the h factors of weight and difference
    quotient cancel.
    """
    u = np.asarray(field, dtype=float)
    d1 = u[..., 1:, :] - u[..., :-1, :]
    d2 = u[..., :, 1:] - u[..., :, :-1]
    return float(np.sqrt(np.sum(d1**2) + np.sum(d2**2)))


def laplace_norm(op: NegLaplacian, field: np.ndarray) -> float:
    """Discrete analogue of the maximal-regularity norm ||Delta u||_{L2}."""
    return l2_norm(op.grid, op.apply(field))
