"""Riemann-Liouville derivatives of monomials, truncated powers and hat functions.

Everything here is closed form except :func:`numeric_rl_oracle`, an
adaptive-quadrature reference used to cross-check the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np
from scipy import integrate
from scipy.special import gamma, rgamma

Side = Literal["left", "right"]


class FracDomainError(ValueError):
    """Argument outside the domain of a fractional operator."""


class OracleConvergenceError(RuntimeError):
    """Adaptive quadrature in the reference oracle did not converge."""


@dataclass(frozen=True)
class FracOrder:
    """Equation order ``alpha`` in (1, 2) and the energy order ``mu = alpha / 2``."""

    alpha: float

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise FracDomainError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def mu(self) -> float:
        return self.alpha / 2.0

    @property
    def scale(self) -> float:
        """``1 / (2 cos(pi mu))``; negative on the admissible range."""
        return 1.0 / (2.0 * math.cos(math.pi * self.mu))


@dataclass(frozen=True)
class TruncatedPower:
    """``coefficient * (x - knot)_+ ** exponent`` (mirrored for right derivatives)."""

    knot: float
    exponent: int
    coefficient: float = 1.0

    def __post_init__(self):
        if self.exponent < 0 or int(self.exponent) != self.exponent:
            raise FracDomainError("exponent must be a non-negative integer")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.knot
        return np.where(d >= 0.0, self.coefficient * np.maximum(d, 0.0) ** self.exponent, 0.0)


def _check_mu(mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise FracDomainError(f"mu must lie in (0, 1), got {mu}")


def monomial_coefficient(p: int, order: float) -> float:
    """``Gamma(p+1) / Gamma(p+1-order)``; zero where the denominator has a pole."""
    return float(gamma(p + 1.0) * rgamma(p + 1.0 - order))


def _power_deriv(p: int, order: float, dist):
    """RL derivative of ``d**p`` in the distance ``d`` to the lower terminal."""
    dist = np.asarray(dist, dtype=float)
    c = monomial_coefficient(p, order)
    e = p - order
    with np.errstate(divide="ignore"):
        out = c * np.where(dist > 0.0, np.abs(dist) ** e, 0.0 if e > 0 else np.inf)
    if c == 0.0:
        out = np.zeros_like(dist)
    return out


def rl_left_deriv_monomial(p: int, mu: float, a: float, x):
    """Left RL derivative of order ``mu`` of ``(x - a)**p``.

    Returns ``Gamma(p+1)/Gamma(p+1-mu) * (x-a)**(p-mu)``.  At ``x == a`` the
    value is 0 for ``p > mu`` and ``inf`` for ``p == 0``.
    """
    _check_mu(mu)
    x = np.asarray(x, dtype=float)
    if np.any(x < a):
        raise FracDomainError("left derivative requested below the terminal")
    out = _power_deriv(p, mu, x - a)
    return float(out) if out.ndim == 0 else out


def rl_right_deriv_monomial(p: int, mu: float, b: float, x):
    """Right RL derivative of order ``mu`` of ``(b - x)**p``, by reflection."""
    _check_mu(mu)
    x = np.asarray(x, dtype=float)
    if np.any(x > b):
        raise FracDomainError("right derivative requested above the terminal")
    out = _power_deriv(p, mu, b - x)
    return float(out) if out.ndim == 0 else out


def rl_deriv_truncated_power(tp: TruncatedPower, mu: float, x, side: Side = "left"):
    """Derivative of order ``mu`` of a truncated power.

    For ``side="left"`` the function is ``c (x - knot)_+^p`` and the lower
    terminal is assumed to sit at or below the knot.  For ``side="right"`` it
    is the mirrored ``c (knot - x)_+^p`` with the upper terminal at or above it.
    """
    _check_mu(mu)
    x = np.asarray(x, dtype=float)
    dist = x - tp.knot if side == "left" else tp.knot - x
    out = tp.coefficient * _power_deriv(tp.exponent, mu, np.maximum(dist, 0.0))
    out = np.where(dist > 0.0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def hat_truncated_powers(nodes: np.ndarray, i: int, side: Side = "left") -> list[TruncatedPower]:
    """Three-term truncated-power expansion of hat ``i`` on a uniform node array."""
    h = nodes[1] - nodes[0]
    knots = (nodes[i - 1], nodes[i], nodes[i + 1])
    if side == "right":
        knots = knots[::-1]
    return [TruncatedPower(k, 1, c / h) for k, c in zip(knots, (1.0, -2.0, 1.0))]


def rl_deriv_hat(mesh, i: int, mu: float, x, side: Side = "left"):
    """Exact derivative of order ``mu`` of interior hat function ``i`` of ``mesh``.

    ``mesh`` needs ``nodes`` and ``n_cells``; ``1 <= i <= n_cells - 1``.
    """
    if not 1 <= i <= mesh.n_cells - 1:
        raise IndexError(f"hat index {i} outside 1..{mesh.n_cells - 1}")
    x = np.asarray(x, dtype=float)
    out = sum(rl_deriv_truncated_power(tp, mu, x, side) for tp in hat_truncated_powers(mesh.nodes, i, side))
    return float(out) if np.ndim(out) == 0 else out


def toeplitz_stiffness_symbol(n: int, mu: float) -> np.ndarray:
    """First column ``t_k`` of the 1-D fractional stiffness on a unit-spacing grid.

    Entry ``s_ij`` of the stiffness on spacing ``h`` equals
    ``h**(1-2mu) * t_|i-j|``; ``t_k`` is the centred fourth difference of
    ``|k|**(3-2mu)`` divided by ``Gamma(4-2mu)``.
    """
    _check_mu(mu)
    k = np.arange(n, dtype=float)
    g = lambda d: np.abs(d) ** (3.0 - 2.0 * mu)  # noqa: E731
    fourth = g(k - 2) - 4 * g(k - 1) + 6 * g(k) - 4 * g(k + 1) + g(k + 2)
    return fourth / gamma(4.0 - 2.0 * mu)


def numeric_rl_oracle(
    f: Callable[[float], float],
    mu: float,
    a: float,
    x: float,
    *,
    df: Callable[[float], float] | None = None,
    side: Side = "left",
    breakpoints: Iterable[float] = (),
    tol: float = 1e-13,
) -> float:
    """Reference RL derivative of order ``mu`` by adaptive quadrature.

    With the derivative ``df`` available the value is

        f(a) (x-a)**(-mu) / Gamma(1-mu) + int_a^x df(s) (x-s)**(-mu) ds / Gamma(1-mu)

    where the piece ending at ``x`` is integrated with QUADPACK's algebraic
    weight rule so the endpoint singularity is handled exactly.  Without
    ``df`` the fractional integral of order ``1-mu`` is computed the same way
    and differentiated by Ridders extrapolation.  For ``side="right"``, ``a``
    is the upper terminal.  Kinks of ``f`` belong in ``breakpoints``.
    """
    _check_mu(mu)
    if side == "right":
        b = a
        g = lambda s: f(b - s)  # noqa: E731
        dg = None if df is None else (lambda s: -df(b - s))
        return numeric_rl_oracle(
            g, mu, 0.0, b - x, df=dg, breakpoints=[b - p for p in breakpoints], tol=tol
        )
    if x < a:
        raise FracDomainError("evaluation point below the terminal")
    if x == a:
        return 0.0 if f(a) == 0.0 else math.inf
    bps = sorted(p for p in breakpoints if a < p < x)
    g1 = math.gamma(1.0 - mu)
    if df is not None:
        return (f(a) * (x - a) ** (-mu) + _weighted_integral(df, mu, a, x, bps, tol)) / g1

    def frac_integral(xx):
        return _weighted_integral(f, mu, a, xx, [p for p in bps if p < xx], tol) / g1

    step = 0.1 * min([x - a, *(abs(x - p) for p in bps)] or [x - a])
    val, err = _ridders(frac_integral, x, step)
    if err > 1e-7:
        raise OracleConvergenceError(f"derivative extrapolation error {err:.3e}")
    return val


def _weighted_integral(fun, mu, lo, x, bps, tol):
    """``int_lo^x fun(s) (x-s)**(-mu) ds`` split at ``bps``."""
    edges = [lo, *bps, x]
    total = 0.0
    for s, e in zip(edges[:-2], edges[1:-1]):
        v, err = integrate.quad(lambda t: fun(t) * (x - t) ** (-mu), s, e, epsabs=tol, epsrel=tol, limit=200)
        _check_err(v, err, tol)
        total += v
    s = edges[-2]
    v, err = integrate.quad(fun, s, x, weight="alg", wvar=(0.0, -mu), epsabs=tol, epsrel=tol, limit=200)
    _check_err(v, err, tol)
    return total + v


def _check_err(v, err, tol):
    if not np.isfinite(v) or err > 1e4 * tol * max(1.0, abs(v)):
        raise OracleConvergenceError(f"oracle quadrature error estimate {err:.3e}")


def _ridders(fun, x, step, ntab=10, con=1.4):
    """Ridders' polynomial extrapolation of a central difference."""
    con2 = con * con
    a = np.zeros((ntab, ntab))
    hh = step
    a[0, 0] = (fun(x + hh) - fun(x - hh)) / (2.0 * hh)
    best, err = a[0, 0], math.inf
    for i in range(1, ntab):
        hh /= con
        a[0, i] = (fun(x + hh) - fun(x - hh)) / (2.0 * hh)
        fac = con2
        for j in range(1, i + 1):
            a[j, i] = (a[j - 1, i] * fac - a[j - 1, i - 1]) / (fac - 1.0)
            fac *= con2
            errt = max(abs(a[j, i] - a[j - 1, i]), abs(a[j, i] - a[j - 1, i - 1]))
            if errt <= err:
                err, best = errt, a[j, i]
        if abs(a[i, i] - a[i - 1, i - 1]) >= 2.0 * err:
            break
    return best, err
