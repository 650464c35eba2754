"""Error norms, convergence rates and discrete energy diagnostics."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma

from . import kernels
from .assembly import OperatorSet, TensorMesh2D


class MetricError(ValueError):
    pass


@dataclass
class ErrorRecord:
    h: float
    tau: float
    tau_c: float
    M: int
    err_l2: float
    err_mu: Optional[float] = None
    cpu_ttm: Optional[float] = None
    cpu_fe: Optional[float] = None

    def __post_init__(self):
        if min(self.h, self.tau, self.tau_c, self.M) <= 0:
            raise MetricError("discretization parameters must be positive")
        if self.err_l2 < 0 or (self.err_mu is not None and self.err_mu < 0):
            raise MetricError("errors must be non-negative")


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """A fine FE solution used in place of an exact solution."""

    coeffs: np.ndarray
    mesh: TensorMesh2D

    @functools.cached_property
    def _interpolator(self):
        Up = self.mesh.pad(self.coeffs)
        return RegularGridInterpolator((self.mesh.mesh_y.nodes, self.mesh.mesh_x.nodes), Up, method="linear")

    def sample(self, x, y) -> np.ndarray:
        """Bilinear FE evaluation at arbitrary points of the square."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self._interpolator(np.stack([y.ravel(), x.ravel()], axis=-1)).reshape(x.shape)

    def at_nodes(self, mesh: TensorMesh2D) -> np.ndarray:
        """Interior nodal values on ``mesh``; plain restriction when the meshes nest."""
        X, Y = np.meshgrid(mesh.mesh_x.nodes[1:-1], mesh.mesh_y.nodes[1:-1])
        return self.sample(X, Y).ravel()


def _quad_l2(Q: np.ndarray, mesh: TensorMesh2D) -> float:
    w = np.multiply.outer(kernels.GAUSS_W, kernels.GAUSS_W)
    return float(np.sqrt(mesh.hx * mesh.hy * np.einsum("ijba,ba->", Q * Q, w)))


def l2_norm(U, mesh: TensorMesh2D) -> float:
    """Exact L2 norm of the FE function with coefficients ``U``."""
    return _quad_l2(kernels.cell_quad_values(mesh.pad(U)), mesh)


def error_l2(
    U,
    exact: Union[Callable, ReferenceSolution, None],
    mesh: TensorMesh2D,
    t: Optional[float] = None,
    reference_mode: str = "pointwise",
) -> float:
    """``||u - u_h||`` by 3x3 Gauss per cell.

    ``exact`` is ``u(x, y)`` (or ``u(x, y, t)`` when ``t`` is given), a
    :class:`ReferenceSolution`, or ``None`` for zero.  A reference is
    evaluated as a bilinear function at the Gauss points
    (``reference_mode="pointwise"``), or first reduced to its values at the
    nodes of ``mesh`` (``"nodal"``).
    """
    U = np.asarray(U, dtype=float)
    if U.size != mesh.n_dofs:
        raise MetricError("state does not match the mesh")
    Q = kernels.cell_quad_values(mesh.pad(U))
    if isinstance(exact, ReferenceSolution):
        if exact.mesh.hx > mesh.hx or exact.mesh.hy > mesh.hy:
            raise MetricError("reference mesh must be at least as fine as the evaluated mesh")
        if reference_mode == "nodal":
            return l2_norm(U - exact.at_nodes(mesh), mesh)
        if reference_mode != "pointwise":
            raise MetricError(f"unknown reference mode {reference_mode!r}")
        return _quad_l2(Q - exact.sample(*mesh.quad_grid()), mesh)
    if exact is not None:
        X, Y = mesh.quad_grid()
        Q = Q - (exact(X, Y) if t is None else exact(X, Y, t))
    return _quad_l2(Q, mesh)


class FracDerivField:
    """Left RL derivative of order ``mu`` of an FE function along one axis.

    On each grid line the FE function is piecewise linear, ``g(x) =
    sum_k d_k (x - x_k)_+`` with ``d_k`` the slope jumps, so

        D^mu g(x) = sum_k d_k (x - x_k)_+^(1 - mu) / Gamma(2 - mu)

    The other coordinate is handled by linear interpolation between grid lines.
    """

    def __init__(self, U, mesh: TensorMesh2D, mu: float, direction: str = "x"):
        if direction not in ("x", "y"):
            raise MetricError("direction must be 'x' or 'y'")
        if not 0.0 < mu < 1.0:
            raise MetricError("mu must lie in (0, 1)")
        self.mu = mu
        self.direction = direction
        Up = mesh.pad(U)
        if direction == "y":
            Up = Up.T
            self._along, self._across = mesh.mesh_y, mesh.mesh_x
        else:
            self._along, self._across = mesh.mesh_x, mesh.mesh_y
        slopes = np.diff(Up, axis=1) / self._along.h
        # jumps[line, k]: slope change at node k (k = 0 .. n_cells - 1)
        self._jumps = np.diff(slopes, axis=1, prepend=0.0) / gamma(2.0 - mu)

    def _along_values(self, s):
        """Values on every grid line at coordinates ``s``: shape ``(len(s), n_lines)``."""
        knots = self._along.nodes[:-1]
        P = np.maximum(np.subtract.outer(s, knots), 0.0) ** (1.0 - self.mu)
        return P @ self._jumps.T

    def _across_weights(self, r):
        """Hat-function values of the transverse grid at ``r``: ``(len(r), n_lines)``."""
        nodes = self._across.nodes
        return np.maximum(0.0, 1.0 - np.abs(np.subtract.outer(r, nodes)) / self._across.h)

    def on_grid(self, xs, ys) -> np.ndarray:
        """Values on the tensor grid ``xs`` x ``ys``; shape ``(len(ys), len(xs))``."""
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        if self.direction == "x":
            return self._across_weights(ys) @ self._along_values(xs).T
        return self._along_values(ys) @ self._across_weights(xs).T

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        s, r = (x, y) if self.direction == "x" else (y, x)
        A = self._along_values(s.ravel())
        W = self._across_weights(r.ravel())
        return np.einsum("pl,pl->p", A, W).reshape(x.shape)


def fe_frac_deriv_field(U, mesh: TensorMesh2D, mu: float, direction: str = "x") -> FracDerivField:
    return FracDerivField(U, mesh, mu, direction)


def _gauss_points(mesh1d, n):
    xg, wg = np.polynomial.legendre.leggauss(n)
    pts = mesh1d.nodes[:-1, None] + 0.5 * mesh1d.h * (xg[None, :] + 1.0)
    return pts.ravel(), np.tile(0.5 * mesh1d.h * wg, mesh1d.n_cells)


def error_frac_norm(U, exact, mesh: TensorMesh2D, mu: float, t: float, n_gauss: int = 5) -> float:
    """Left fractional norm ``(||e||^2 + ||D^mu_x e||^2 + ||D^mu_y e||^2)^(1/2)`` of ``e = u - u_h``.

    ``exact`` must provide ``__call__(x, y, t)``, ``left_deriv_x(mu, x, y, t)``
    and ``left_deriv_y(mu, x, y, t)``.  The derivative terms use ``n_gauss``
    points per cell and direction; the L2 term uses the 3x3 rule.
    """
    if exact is None or not (hasattr(exact, "left_deriv_x") and hasattr(exact, "left_deriv_y")):
        raise MetricError("fractional norm needs an exact solution with analytic left derivatives")
    l2 = error_l2(U, exact, mesh, t)
    xs, wx = _gauss_points(mesh.mesh_x, n_gauss)
    ys, wy = _gauss_points(mesh.mesh_y, n_gauss)
    X, Y = np.meshgrid(xs, ys)
    W = np.outer(wy, wx)
    total = l2 * l2
    for direction, deriv in (("x", exact.left_deriv_x), ("y", exact.left_deriv_y)):
        e = deriv(mu, X, Y, t) - FracDerivField(U, mesh, mu, direction).on_grid(xs, ys)
        total += float(np.sum(W * e * e))
    return math.sqrt(total)


def convergence_rate(e_coarse: float, e_fine: float, ratio: float) -> float:
    """Observed order ``log(e_coarse / e_fine) / log(ratio)``."""
    if e_coarse <= 0 or e_fine <= 0:
        raise MetricError("errors must be positive to form a rate")
    if ratio <= 1:
        raise MetricError("refinement ratio must exceed 1")
    return math.log(e_coarse / e_fine) / math.log(ratio)


def energy_H(U_new, U_old, theta: float, opset: OperatorSet) -> float:
    """Quadratic energy of two consecutive levels in the FE mass inner product."""
    if not 0.0 <= theta <= 0.5:
        raise MetricError("theta must lie in [0, 1/2]")
    U_new = np.asarray(U_new, dtype=float)
    U_old = np.asarray(U_old, dtype=float)

    def sq(v):
        return float(v @ opset.apply_mass(v))

    return (3 - 2 * theta) * sq(U_new) - (1 - 2 * theta) * sq(U_old) + (2 - theta) * (1 - 2 * theta) * sq(U_new - U_old)


def seminorm_mu(U, opset: OperatorSet) -> float:
    """``sqrt(B(u_h, u_h))``; a negative quadratic form is an assembly fault."""
    U = np.asarray(U, dtype=float)
    q = float(U @ opset.apply_B(U))
    if q < -1e-14 * max(1.0, float(U @ U)):
        raise MetricError(f"bilinear form is negative on the given state ({q:.3e})")
    return math.sqrt(max(q, 0.0))


def mass_norm(U, opset: OperatorSet) -> float:
    U = np.asarray(U, dtype=float)
    return math.sqrt(float(U @ opset.apply_mass(U)))
