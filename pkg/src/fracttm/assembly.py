"""Uniform tensor meshes, bilinear elements, and operator assembly.

Degrees of freedom are the interior nodes of a rectangle, ordered
lexicographically with x fastest.  A coefficient vector of length
``(nx - 1) * (ny - 1)`` reshapes to ``(ny - 1, nx - 1)`` with rows indexed
by y.  In that ordering the 2-D fractional form is

    B = scale * (kron(M_y, S_x) + kron(S_y, M_x))

with 1-D mass ``M`` and 1-D fractional stiffness ``S``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, toeplitz

from . import kernels
from .fraccalc import FracOrder, rl_deriv_hat, toeplitz_stiffness_symbol


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh1D:
    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise MeshError("a mesh needs at least two cells to carry an interior node")
        if not self.b > self.a:
            raise MeshError("empty interval")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n_cells + 1)

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    def quad_points(self) -> np.ndarray:
        """3-point Gauss abscissae, shape ``(n_cells, 3)``."""
        return self.nodes[:-1, None] + self.h * kernels.GAUSS_X[None, :]


@dataclass(frozen=True)
class TensorMesh2D:
    mesh_x: Mesh1D
    mesh_y: Mesh1D

    @classmethod
    def unit_square(cls, n_cells: int, n_cells_y: int | None = None) -> "TensorMesh2D":
        return cls(Mesh1D(0.0, 1.0, n_cells), Mesh1D(0.0, 1.0, n_cells_y or n_cells))

    @property
    def shape(self) -> tuple[int, int]:
        """Interior grid shape ``(ny - 1, nx - 1)``."""
        return self.mesh_y.n_interior, self.mesh_x.n_interior

    @property
    def n_dofs(self) -> int:
        return self.mesh_x.n_interior * self.mesh_y.n_interior

    @property
    def hx(self) -> float:
        return self.mesh_x.h

    @property
    def hy(self) -> float:
        return self.mesh_y.h

    def pad(self, u) -> np.ndarray:
        """Interior coefficients -> full nodal grid with zero boundary."""
        u = np.asarray(u, dtype=float)
        if u.size != self.n_dofs:
            raise MeshError(f"state has {u.size} entries, mesh has {self.n_dofs} dofs")
        Up = np.zeros((self.mesh_y.n_cells + 1, self.mesh_x.n_cells + 1))
        Up[1:-1, 1:-1] = u.reshape(self.shape)
        return Up

    def quad_grid(self):
        """Coordinates of every 3x3 Gauss point, each shaped ``(ny, nx, 3, 3)``."""
        qx = self.mesh_x.quad_points()
        qy = self.mesh_y.quad_points()
        X = np.broadcast_to(qx[None, :, None, :], (qy.shape[0], qx.shape[0], 3, 3))
        Y = np.broadcast_to(qy[:, None, :, None], (qy.shape[0], qx.shape[0], 3, 3))
        return X, Y


@dataclass
class StateVector:
    """Interior FE coefficients at one time level."""

    coeffs: np.ndarray
    time_label: float = 0.0
    report: object = field(default=None, repr=False, compare=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def __len__(self):
        return len(self.coeffs)


# -- 1-D operators ----------------------------------------------------------


def assemble_mass_1d(mesh: Mesh1D) -> np.ndarray:
    """Interior P1 mass matrix: ``2h/3`` on the diagonal, ``h/6`` beside it."""
    n = mesh.n_interior
    h = mesh.h
    return (2.0 * h / 3.0) * np.eye(n) + (h / 6.0) * (np.eye(n, k=1) + np.eye(n, k=-1))


def assemble_frac_stiffness_1d(mesh: Mesh1D, mu: float, method: str = "exact") -> np.ndarray:
    """Unscaled fractional stiffness ``s_ij = (DL phi_j, DR phi_i) + (DR phi_j, DL phi_i)``.

    ``method="exact"`` integrates products of truncated powers in closed form
    (Beta integrals) which gives a symmetric Toeplitz matrix.  ``"gauss"``
    uses 6-point Gauss per cell on the closed-form hat derivatives.
    """
    n = mesh.n_interior
    if method == "exact":
        col = mesh.h ** (1.0 - 2.0 * mu) * toeplitz_stiffness_symbol(n, mu)
        return toeplitz(col)
    if method != "gauss":
        raise ValueError(f"unknown stiffness method {method!r}")
    xg, wg = np.polynomial.legendre.leggauss(6)
    nodes = mesh.nodes
    pts = (nodes[:-1, None] + 0.5 * mesh.h * (xg[None, :] + 1.0)).ravel()
    wts = np.tile(0.5 * mesh.h * wg, mesh.n_cells)
    DL = np.array([rl_deriv_hat(mesh, i, mu, pts, "left") for i in range(1, n + 1)])
    DR = np.array([rl_deriv_hat(mesh, i, mu, pts, "right") for i in range(1, n + 1)])
    cross = (DR * wts) @ DL.T
    return cross + cross.T


# -- 2-D operator set --------------------------------------------------------


@dataclass(frozen=True)
class OperatorSet:
    mesh: TensorMesh2D
    mass_x: np.ndarray
    mass_y: np.ndarray
    stiff_x: np.ndarray
    stiff_y: np.ndarray
    scale: float
    order: FracOrder
    epsilon: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def apply_mass(self, u) -> np.ndarray:
        U = np.asarray(u, dtype=float).reshape(self.mesh.shape)
        return (self.mass_y @ U @ self.mass_x).ravel()

    def apply_B(self, u) -> np.ndarray:
        U = np.asarray(u, dtype=float).reshape(self.mesh.shape)
        return self.scale * (self.mass_y @ U @ self.stiff_x + self.stiff_y @ U @ self.mass_x).ravel()

    def mass_matrix(self) -> np.ndarray:
        if "mass" not in self._cache:
            self._cache["mass"] = np.kron(self.mass_y, self.mass_x)
        return self._cache["mass"]

    def B_matrix(self) -> np.ndarray:
        if "B" not in self._cache:
            self._cache["B"] = self.scale * (
                np.kron(self.mass_y, self.stiff_x) + np.kron(self.stiff_y, self.mass_x)
            )
        return self._cache["B"]

    def scaled_stiffness(self) -> tuple[np.ndarray, np.ndarray]:
        """``scale * S_x``, ``scale * S_y`` (both symmetric positive definite)."""
        return self.scale * self.stiff_x, self.scale * self.stiff_y


def assemble_operators(
    mesh: TensorMesh2D, alpha: float | FracOrder, epsilon: float, method: str = "exact"
) -> OperatorSet:
    order = alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)
    mu = order.mu
    return OperatorSet(
        mesh=mesh,
        mass_x=assemble_mass_1d(mesh.mesh_x),
        mass_y=assemble_mass_1d(mesh.mesh_y),
        stiff_x=assemble_frac_stiffness_1d(mesh.mesh_x, mu, method),
        stiff_y=assemble_frac_stiffness_1d(mesh.mesh_y, mu, method),
        scale=epsilon**2 / (2.0 * math.cos(math.pi * mu)),
        order=order,
        epsilon=epsilon,
    )


def compose_2d_apply(opset: OperatorSet, u) -> np.ndarray:
    """``B u`` through the Kronecker factors, never forming the 2-D matrix."""
    u = np.asarray(u, dtype=float)
    if u.size != opset.mesh.n_dofs:
        raise MeshError("state does not match the operator mesh")
    return opset.apply_B(u)


# -- quadrature-based 2-D terms ----------------------------------------------


def quad_values(mesh: TensorMesh2D, u) -> np.ndarray:
    """FE field ``u`` evaluated at every 3x3 Gauss point."""
    return kernels.cell_quad_values(mesh.pad(u))


def _weight_at_quad(mesh: TensorMesh2D, weight) -> np.ndarray:
    if callable(weight):
        X, Y = mesh.quad_grid()
        return np.array(np.broadcast_to(weight(X, Y), X.shape), dtype=float, order="C")
    weight = np.asarray(weight, dtype=float)
    if weight.ndim == 0:
        return np.full((mesh.mesh_y.n_cells, mesh.mesh_x.n_cells, 3, 3), float(weight))
    if weight.shape == (mesh.mesh_y.n_cells, mesh.mesh_x.n_cells, 3, 3):
        return np.array(weight, dtype=float, order="C")
    return quad_values(mesh, weight)


def weighted_mass_stencil(mesh: TensorMesh2D, weight) -> np.ndarray:
    return kernels.quad_mass_stencil(_weight_at_quad(mesh, weight), mesh.hx, mesh.hy)


@functools.lru_cache(maxsize=32)
def _stencil_pattern(ny: int, nx: int):
    """Row/col indices and source positions of the interior 9-point pattern."""
    nyi, nxi = ny - 1, nx - 1
    J, I = np.meshgrid(np.arange(nyi), np.arange(nxi), indexing="ij")
    rows, cols, src = [], [], []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            ok = (J + dy >= 0) & (J + dy < nyi) & (I + dx >= 0) & (I + dx < nxi)
            j, i = J[ok], I[ok]
            rows.append(j * nxi + i)
            cols.append((j + dy) * nxi + (i + dx))
            src.append(np.ravel_multi_index((np.full(j.shape, dy + 1), np.full(j.shape, dx + 1), j + 1, i + 1),
                                            (3, 3, ny + 1, nx + 1)))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    src = np.concatenate(src)
    order = np.lexsort((cols, rows))
    rows, cols, src = rows[order], cols[order], src[order]
    indptr = np.searchsorted(rows, np.arange(nyi * nxi + 1))
    return rows, cols, src, indptr


def stencil_to_csr(mesh: TensorMesh2D, S: np.ndarray) -> sp.csr_matrix:
    ny, nx = mesh.mesh_y.n_cells, mesh.mesh_x.n_cells
    _, cols, src, indptr = _stencil_pattern(ny, nx)
    n = mesh.n_dofs
    return sp.csr_matrix((S.ravel()[src], cols, indptr), shape=(n, n))


def stencil_add_dense(mesh: TensorMesh2D, A: np.ndarray, S: np.ndarray, c: float = 1.0) -> np.ndarray:
    """``A += c * W`` in place for the stencil operator ``W``."""
    rows, cols, src, _ = _stencil_pattern(mesh.mesh_y.n_cells, mesh.mesh_x.n_cells)
    A[rows, cols] += c * S.ravel()[src]
    return A


def stencil_matvec(mesh: TensorMesh2D, S: np.ndarray, u) -> np.ndarray:
    return kernels.stencil_apply(S, mesh.pad(u)).ravel()


def assemble_weighted_mass(mesh: TensorMesh2D, weight) -> sp.csr_matrix:
    """Sparse ``W_ij = int w phi_i phi_j``.

    ``weight`` may be a scalar, a callable ``w(x, y)``, interior FE
    coefficients (interpolated with the element basis), or values at the
    3x3 Gauss points.
    """
    return stencil_to_csr(mesh, weighted_mass_stencil(mesh, weight))


def assemble_load(g: Callable, t: float, mesh: TensorMesh2D) -> np.ndarray:
    """Interior load vector ``int g(., t) phi_ij`` by 3x3 Gauss per cell."""
    X, Y = mesh.quad_grid()
    G = np.array(np.broadcast_to(g(X, Y, t), X.shape), dtype=float, order="C")
    return kernels.quad_load(G, mesh.hx, mesh.hy)[1:-1, 1:-1].ravel()


def nodal_interpolate(f: Callable, mesh: TensorMesh2D) -> np.ndarray:
    """Values of ``f(x, y)`` at the interior nodes, x fastest."""
    x = mesh.mesh_x.nodes[1:-1]
    y = mesh.mesh_y.nodes[1:-1]
    X, Y = np.meshgrid(x, y)
    return np.asarray(np.broadcast_to(f(X, Y), X.shape), dtype=float).ravel()


def l2_project(f: Callable, mesh: TensorMesh2D) -> np.ndarray:
    """Interior coefficients of the L2 projection of ``f(x, y)`` onto the FE space.

    The load uses 3x3 Gauss per cell; the tensor mass system is solved one
    direction at a time.
    """
    b = assemble_load(lambda x, y, t: f(x, y), 0.0, mesh).reshape(mesh.shape)
    Mx = assemble_mass_1d(mesh.mesh_x)
    My = assemble_mass_1d(mesh.mesh_y)
    return cho_solve(cho_factor(Mx), cho_solve(cho_factor(My), b).T).T.ravel()


def initial_coefficients(f: Callable, mesh: TensorMesh2D, method: str = "l2") -> np.ndarray:
    """Discrete initial datum: ``"l2"`` projection or ``"nodal"`` interpolation."""
    if method == "l2":
        return l2_project(f, mesh)
    if method == "nodal":
        return nodal_interpolate(f, mesh)
    raise ValueError(f"unknown initial projection {method!r}")
