"""Benchmark problems for the fractional Allen-Cahn equation on the unit square.

The equation is ``u_t - eps^2 L u + f(u) = g`` with ``f(u) = u^3 - u``,
homogeneous Dirichlet data and

    L u = (D_left^alpha u + D_right^alpha u) / (-2 cos(pi alpha / 2))

in each coordinate direction.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .fraccalc import FracOrder, monomial_coefficient


class UnsupportedProblemError(ValueError):
    pass


@dataclass(frozen=True)
class SeparablePoly:
    """Polynomial ``sum_p c_p x^p`` on [0, 1] with closed-form RL derivatives.

    Only terms of degree >= 2 are allowed at both ends so every fractional
    derivative of order below 2 stays bounded at the boundary.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        mirrored = self.mirrored_coeffs()
        for c in (self.coeffs, mirrored):
            if any(abs(v) > 1e-14 for v in c[:2]):
                raise UnsupportedProblemError("polynomial must vanish to second order at 0 and 1")

    def mirrored_coeffs(self) -> tuple[float, ...]:
        """Coefficients of ``p(1 - x)``."""
        return _mirror(self.coeffs)

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    @staticmethod
    def _left(coeffs, order, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p, c in enumerate(coeffs):
            if c != 0.0:
                out = out + c * monomial_coefficient(p, order) * np.where(x > 0, np.abs(x) ** (p - order), 0.0)
        return out

    def left_deriv(self, order: float, x):
        """Left RL derivative from 0 of any order in (0, 2)."""
        return self._left(self.coeffs, order, x)

    def right_deriv(self, order: float, x):
        """Right RL derivative from 1, by reflection."""
        return self._left(self.mirrored_coeffs(), order, 1.0 - np.asarray(x, dtype=float))


@functools.lru_cache(maxsize=64)
def _mirror(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    out = np.zeros(len(coeffs))
    for k, c in enumerate(coeffs):
        out += c * np.pad(P.polypow([1.0, -1.0], k), (0, len(coeffs) - k - 1))
    return tuple(float(v) for v in out)


QUARTIC = SeparablePoly((0.0, 0.0, 1.0, -2.0, 1.0))  # x^2 (1 - x)^2


@dataclass(frozen=True)
class ExpSeparableSolution:
    """``u(x, y, t) = exp(t) X(x) Y(y)``."""

    X: SeparablePoly
    Y: SeparablePoly

    def __call__(self, x, y, t):
        return np.exp(t) * self.X(x) * self.Y(y)

    def frac_operator(self, alpha: float, x, y, t):
        """``L u`` in closed form."""
        c = 1.0 / (-2.0 * math.cos(math.pi * alpha / 2.0))
        Lx = (self.X.left_deriv(alpha, x) + self.X.right_deriv(alpha, x)) * self.Y(y)
        Ly = self.X(x) * (self.Y.left_deriv(alpha, y) + self.Y.right_deriv(alpha, y))
        return c * np.exp(t) * (Lx + Ly)

    def left_deriv_x(self, mu: float, x, y, t):
        return np.exp(t) * self.X.left_deriv(mu, x) * self.Y(y)

    def left_deriv_y(self, mu: float, x, y, t):
        return np.exp(t) * self.X(x) * self.Y.left_deriv(mu, y)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    alpha: FracOrder
    epsilon: float
    source: Callable
    u0: Callable
    exact: Optional[ExpSeparableSolution] = None
    source_is_zero: bool = False
    T: float = 1.0

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be non-negative")
        if self.T <= 0:
            raise ValueError("horizon must be positive")

    @property
    def mu(self) -> float:
        return self.alpha.mu


def f_eval(u):
    """Allen-Cahn nonlinearity ``u^3 - u``."""
    return u * u * u - u


def f_prime(u):
    return 3.0 * u * u - 1.0


@dataclass(frozen=True)
class ManufacturedSource:
    """``g = u_t - eps^2 L u + f(u)`` for ``u = exp(t) X(x) Y(y)``.

    Since ``u_t = u`` this is ``u^3 - eps^2 L u``.  The spatial factors do
    not depend on ``t``, so :meth:`spatial_parts` lets callers evaluate them
    once per point set and :meth:`combine` rebuilds ``g`` at any time.
    """

    exact: ExpSeparableSolution
    alpha: float
    epsilon: float

    def spatial_parts(self, x, y):
        s = self.exact(x, y, 0.0)
        if self.epsilon == 0.0:
            return s, np.zeros_like(s)
        return s, self.exact.frac_operator(self.alpha, x, y, 0.0)

    def combine(self, parts, t):
        s, ls = parts
        et = math.exp(t)
        u = et * s
        return u + f_eval(u) - (self.epsilon**2 * et) * ls

    def __call__(self, x, y, t):
        return self.combine(self.spatial_parts(x, y), t)


def manufactured_source(exact: ExpSeparableSolution, alpha: float, epsilon: float) -> ManufacturedSource:
    """Source ``g = u_t - eps^2 L u + f(u)`` for an exponential-in-time exact solution."""
    if not isinstance(exact, ExpSeparableSolution):
        raise UnsupportedProblemError("manufactured sources need an ExpSeparableSolution")
    return ManufacturedSource(exact, float(alpha), float(epsilon))


def _order(alpha) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)


def _quartic_u0(x, y):
    return QUARTIC(x) * QUARTIC(y)


def example1_spec(alpha, epsilon: float) -> ProblemSpec:
    """Smooth manufactured solution ``exp(t) x^2 (1-x)^2 y^2 (1-y)^2``."""
    order = _order(alpha)
    exact = ExpSeparableSolution(QUARTIC, QUARTIC)
    return ProblemSpec(
        name="example1",
        alpha=order,
        epsilon=epsilon,
        source=manufactured_source(exact, order.alpha, epsilon),
        u0=_quartic_u0,
        exact=exact,
    )


def _zero_source(x, y, t):
    return np.zeros(np.broadcast(x, y).shape)


def example2_spec(alpha, epsilon: float = 0.01) -> ProblemSpec:
    """Quartic bump initial datum, no source."""
    return ProblemSpec("example2", _order(alpha), epsilon, _zero_source, _quartic_u0, source_is_zero=True)


def example3_u0(x, y):
    """Initial datum with a kink in x at 0.5 (left branch owns the point)."""
    x = np.asarray(x, dtype=float)
    yy = y * (1.0 - y)
    return np.where(x <= 0.5, x**3 * (1.0 - x**3), (7.0 / 16.0) * x * (1.0 - x)) * yy


def example3_spec(alpha, epsilon: float = 0.01) -> ProblemSpec:
    """Non-smooth initial datum, no source."""
    return ProblemSpec("example3", _order(alpha), epsilon, _zero_source, example3_u0, source_is_zero=True)


PROBLEMS = {"example1": example1_spec, "example2": example2_spec, "example3": example3_spec}


def get_problem(name: str, alpha, epsilon: float) -> ProblemSpec:
    try:
        return PROBLEMS[name](alpha, epsilon)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
