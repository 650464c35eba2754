"""Linear solves for systems ``a*Mass + b*B + c*W``.

``W`` is a weighted mass matrix given as a 9-point stencil.  Small meshes
use a dense Cholesky factorization of the assembled matrix, with the
constant part ``a*Mass + b*B`` cached.  Larger meshes use conjugate
gradients preconditioned by the exact inverse of ``a'*Mass + b*B``, which
the Kronecker structure diagonalizes through two 1-D generalized eigenproblems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, LinAlgError
from scipy.sparse.linalg import LinearOperator, cg

from .assembly import OperatorSet, stencil_add_dense, stencil_matvec


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    strategy: str = "auto"  # "auto", "dense" or "pcg"
    dense_max_dofs: int = 1600
    pcg_rtol: float = 1e-13
    pcg_atol: float = 1e-14
    pcg_maxiter: int = 500


class SystemSolver:
    """Solver bound to one operator set."""

    def __init__(self, opset: OperatorSet, config: SolverConfig | None = None):
        self.opset = opset
        self.config = config or SolverConfig()
        strategy = self.config.strategy
        if strategy == "auto":
            strategy = "dense" if opset.mesh.n_dofs <= self.config.dense_max_dofs else "pcg"
        if strategy not in ("dense", "pcg"):
            raise ValueError(f"unknown solver strategy {strategy!r}")
        self.strategy = strategy
        self._base: dict[tuple[float, float], np.ndarray] = {}
        self._eig = None

    # -- matrices -----------------------------------------------------------

    def base_matrix(self, a: float, b: float) -> np.ndarray:
        key = (float(a), float(b))
        if key not in self._base:
            self._base[key] = a * self.opset.mass_matrix() + b * self.opset.B_matrix()
        return self._base[key]

    def dense_matrix(self, a: float, b: float, c: float = 0.0, stencil=None) -> np.ndarray:
        A = self.base_matrix(a, b).copy()
        if stencil is not None and c != 0.0:
            stencil_add_dense(self.opset.mesh, A, stencil, c)
        return A

    def matvec(self, a: float, b: float, c: float, stencil, u) -> np.ndarray:
        out = a * self.opset.apply_mass(u) + b * self.opset.apply_B(u)
        if stencil is not None and c != 0.0:
            out += c * stencil_matvec(self.opset.mesh, stencil, u)
        return out

    # -- solves -------------------------------------------------------------

    def solve(self, a: float, b: float, rhs, c: float = 0.0, stencil=None) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.strategy == "dense":
            A = self.dense_matrix(a, b, c, stencil)
            try:
                return cho_solve(cho_factor(A, lower=True, check_finite=False), rhs, check_finite=False)
            except LinAlgError as exc:
                raise LinearSolveError("system matrix is not positive definite") from exc
        return self._solve_pcg(a, b, c, stencil, rhs)

    def _eigen(self):
        if self._eig is None:
            Sx, Sy = self.opset.scaled_stiffness()
            lx, Vx = eigh(Sx, self.opset.mass_x)
            ly, Vy = eigh(Sy, self.opset.mass_y)
            self._eig = (lx, Vx, ly, Vy)
        return self._eig

    def _solve_pcg(self, a, b, c, stencil, rhs):
        mesh = self.opset.mesh
        n = mesh.n_dofs
        lx, Vx, ly, Vy = self._eigen()
        shift = a
        if stencil is not None and c != 0.0:
            # mean row sum of W divided by the mean row sum of Mass estimates the average weight
            wsum = stencil_matvec(mesh, stencil, np.ones(n)).sum()
            msum = self.opset.apply_mass(np.ones(n)).sum()
            shift += c * wsum / msum
        shift = max(shift, 1e-3 * a)
        denom = shift + b * (ly[:, None] + lx[None, :])

        def precond(r):
            R = r.reshape(mesh.shape)
            return (Vy @ ((Vy.T @ R @ Vx) / denom) @ Vx.T).ravel()

        A = LinearOperator((n, n), matvec=lambda u: self.matvec(a, b, c, stencil, u), dtype=float)
        P = LinearOperator((n, n), matvec=precond, dtype=float)
        x0 = precond(rhs)
        x, info = cg(A, rhs, x0=x0, M=P, rtol=self.config.pcg_rtol, atol=self.config.pcg_atol,
                     maxiter=self.config.pcg_maxiter)
        if info != 0:
            res = np.linalg.norm(A @ x - rhs)
            raise LinearSolveError(f"PCG stopped with info={info}, residual {res:.3e}")
        return x
