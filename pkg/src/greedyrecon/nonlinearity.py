"""Monomial bases and two-component reaction nonlinearities.

The interaction between the two field components is modelled by a scalar
function G of the pointwise values (y1, y2), lifted to the coupled reaction
term ``g(y) = (gamma1 * G(y), -gamma2 * G(y))`` with ``gamma1 >= gamma2 > 0``
(predator-prey sign structure).  G is either a coefficient combination of
2-D monomials or one of three closed-form targets used to synthesize data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError

CLOSED_FORM_KINDS = ("bilinear", "sinusoidal", "exponential")


class MonomialBasis:
    """All 2-D monomials y1^i1 * y2^i2 of total degree i1 + i2 <= P.

    The initial enumeration is graded: ascending total degree, then
    ascending maximum entrywise degree, then descending y1-degree, which
    starts 1, y1, y2, y1*y2, y1^2, y2^2, y1^2*y2, ...  ``order`` is a
    mutable permutation of that enumeration; the greedy driver promotes
    selected candidates by swapping positions.  All position-based lookups
    go through ``order``.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError(f"polynomial degree must be >= 0, got {degree}")
        self.degree = degree
        exps = [
            (i1, d - i1)
            for d in range(degree + 1)
            for i1 in range(d + 1)
        ]
        exps.sort(key=lambda e: (e[0] + e[1], max(e), -e[0]))
        self.exponents = tuple(exps)
        self.order = np.arange(len(exps))

    @property
    def size(self) -> int:
        """Number of basis elements, (P+1)(P+2)/2."""
        return len(self.exponents)

    def exponent(self, pos: int) -> tuple[int, int]:
        """Exponent pair sitting at position ``pos`` of the current order."""
        return self.exponents[self.order[pos]]

    def ordered_exponents(self) -> list[tuple[int, int]]:
        return [self.exponents[j] for j in self.order]

    def position_of(self, exp: tuple[int, int]) -> int:
        """Current position of the monomial with the given exponent pair."""
        j = self.exponents.index(tuple(exp))
        return int(np.nonzero(self.order == j)[0][0])

    def swap(self, a: int, b: int) -> None:
        self.order[[a, b]] = self.order[[b, a]]

    def copy(self) -> "MonomialBasis":
        other = MonomialBasis(self.degree)
        other.order = self.order.copy()
        return other

    def monomials(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        """Stack of all K monomials at the given points, in current order.

        Returns an array of shape (K,) + broadcast(y1, y2).shape.
        """
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        return np.stack([y1**i1 * y2**i2 for i1, i2 in self.ordered_exponents()])


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Base for the lifted coupling (gamma1*G, -gamma2*G)."""

    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not (self.gamma1 >= self.gamma2 > 0):
            raise ValueError(
                f"need gamma1 >= gamma2 > 0, got ({self.gamma1}, {self.gamma2})"
            )

    def G(self, y1, y2):
        raise NotImplementedError

    def dG(self, y1, y2):
        """Partial derivatives (dG/dy1, dG/dy2)."""
        raise NotImplementedError

    def g(self, field: np.ndarray) -> np.ndarray:
        """Lifted reaction term evaluated nodally on a 2-component field.

        Raises NumericalError with the offending node if any output is
        non-finite (e.g. overflow of the exponential target).
        """
        with np.errstate(over="ignore", invalid="ignore"):
            G = self.G(field[0], field[1])
        out = np.stack([self.gamma1 * G, -self.gamma2 * G])
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out))[0]
            raise NumericalError(
                f"non-finite nonlinearity value at component {bad[0]}, "
                f"node ({bad[1]}, {bad[2]})"
            )
        return out

    def jacobian(self, y1, y2) -> np.ndarray:
        """Pointwise Jacobian [[g1*G1, g1*G2], [-g2*G1, -g2*G2]].

        Returns shape (2, 2) + broadcast shape of the inputs.
        """
        dG1, dG2 = self.dG(np.asarray(y1, float), np.asarray(y2, float))
        row1 = np.stack([self.gamma1 * dG1, self.gamma1 * dG2])
        row2 = np.stack([-self.gamma2 * dG1, -self.gamma2 * dG2])
        return np.stack([row1, row2])


@dataclass(frozen=True, eq=False)
class BasisCombo(Nonlinearity):
    """G(y) = sum_j coeffs[j] * monomial at position j of the basis order."""

    basis: MonomialBasis = None
    coeffs: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size > self.basis.size:
            raise ValueError("coefficient vector does not fit the basis")
        object.__setattr__(self, "coeffs", c)

    def _terms(self):
        exps = self.basis.ordered_exponents()
        return [(self.coeffs[j], exps[j]) for j in range(self.coeffs.size)]

    def G(self, y1, y2):
        y1 = np.asarray(y1, float)
        y2 = np.asarray(y2, float)
        total = np.zeros(np.broadcast(y1, y2).shape)
        for c, (i1, i2) in self._terms():
            if c != 0.0:
                total += c * y1**i1 * y2**i2
        return total

    def dG(self, y1, y2):
        d1 = np.zeros(np.broadcast(y1, y2).shape)
        d2 = np.zeros_like(d1)
        for c, (i1, i2) in self._terms():
            if c == 0.0:
                continue
            if i1 > 0:
                d1 += c * i1 * y1 ** (i1 - 1) * y2**i2
            if i2 > 0:
                d2 += c * i2 * y1**i1 * y2 ** (i2 - 1)
        return d1, d2


def unit_combo(basis: MonomialBasis, position: int, gamma1: float, gamma2: float) -> BasisCombo:
    """The single-element nonlinearity with coefficient 1 at ``position``."""
    coeffs = np.zeros(position + 1)
    coeffs[position] = 1.0
    return BasisCombo(gamma1, gamma2, basis=basis, coeffs=coeffs)


@dataclass(frozen=True, eq=False)
class ClosedForm(Nonlinearity):
    """One of the closed-form target interactions.

    bilinear     G(y) = 0.05 * y1 * y2
    sinusoidal   G(y) = 0.01 * sin(2 y1) * sin(2 y2)
    exponential  G(y) = 0.01 * exp(2 y1) * exp(2 y2)
    """

    kind: str = "bilinear"

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in CLOSED_FORM_KINDS:
            raise ValueError(f"unknown closed-form kind {self.kind!r}")

    def G(self, y1, y2):
        if self.kind == "bilinear":
            return 0.05 * y1 * y2
        if self.kind == "sinusoidal":
            return 0.01 * np.sin(2.0 * y1) * np.sin(2.0 * y2)
        return 0.01 * np.exp(2.0 * y1) * np.exp(2.0 * y2)

    def dG(self, y1, y2):
        if self.kind == "bilinear":
            return 0.05 * y2 * np.ones_like(y1), 0.05 * y1 * np.ones_like(y2)
        if self.kind == "sinusoidal":
            return (
                0.02 * np.cos(2.0 * y1) * np.sin(2.0 * y2),
                0.02 * np.sin(2.0 * y1) * np.cos(2.0 * y2),
            )
        e = 0.01 * np.exp(2.0 * y1) * np.exp(2.0 * y2)
        return 2.0 * e, 2.0 * e


def _sin2_series_coeff(m: int) -> float:
    # coefficient of y^m in sin(2y): 0 for even m, (-1)^((m-1)/2) 2^m / m! otherwise
    if m % 2 == 0:
        return 0.0
    return (-1.0) ** ((m - 1) // 2) * 2.0**m / math.factorial(m)


def taylor_coeffs(kind: str, d: int) -> dict[tuple[int, int], float]:
    """Taylor coefficients of the closed-form target at the origin.

    Returns t[(i1, i2)] for all 0 <= i1, i2 <= d, where
    t = d^(i1+i2) G / (dy1^i1 dy2^i2) (0, 0) / (i1! i2!).
    """
    if kind not in CLOSED_FORM_KINDS:
        raise ValueError(f"unknown closed-form kind {kind!r}")
    if d < 0:
        raise ValueError("Taylor order must be >= 0")
    table = {}
    for i1 in range(d + 1):
        for i2 in range(d + 1):
            if kind == "bilinear":
                t = 0.05 if (i1, i2) == (1, 1) else 0.0
            elif kind == "sinusoidal":
                t = 0.01 * _sin2_series_coeff(i1) * _sin2_series_coeff(i2)
            else:
                t = 0.01 * 2.0 ** (i1 + i2) / (math.factorial(i1) * math.factorial(i2))
            table[(i1, i2)] = t
    return table
