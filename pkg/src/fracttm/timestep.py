"""Three-level theta time stepping with a Crank-Nicolson start, solved by Newton.

Every implicit step is written in the common form

    a * Mass U + b * B U + c * F(U) = r

where ``F(U)_i = int f(u_h) phi_i``.  The Newton Jacobian is
``a * Mass + b * B + c * W(f'(u_h))``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .assembly import (
    OperatorSet,
    StateVector,
    TensorMesh2D,
    assemble_load,
    assemble_operators,
    initial_coefficients,
    stencil_matvec,
)
from .problems import ProblemSpec, f_eval, f_prime
from .solvers import SolverConfig, SystemSolver

__all__ = [
    "ThetaScheme", "NewtonConfig", "NewtonDivergence", "NewtonReport", "DiscretizationConfig",
    "FeTrajectory", "theta_weights", "theta_blend", "f_eval", "f_prime", "first_step_nonlinear",
    "step_nonlinear", "run_standard_fe",
]


@dataclass(frozen=True)
class ThetaScheme:
    theta: float
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 0.5:
            raise ValueError(f"theta must lie in [0, 1/2], got {self.theta}")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")


def theta_weights(scheme: ThetaScheme) -> tuple[float, float, float]:
    """Coefficients of ``U^n, U^{n-1}, U^{n-2}`` in the discrete time derivative."""
    th, tau = scheme.theta, scheme.tau
    return (3.0 - 2.0 * th) / (2.0 * tau), -(4.0 - 4.0 * th) / (2.0 * tau), (1.0 - 2.0 * th) / (2.0 * tau)


def theta_blend(scheme: ThetaScheme, v_new, v_old):
    """``(1 - theta) v_new + theta v_old``."""
    v_new = np.asarray(v_new, dtype=float)
    v_old = np.asarray(v_old, dtype=float)
    if v_new.shape != v_old.shape:
        raise ValueError(f"shape mismatch {v_new.shape} vs {v_old.shape}")
    return (1.0 - scheme.theta) * v_new + scheme.theta * v_old


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rule for the nonlinear solves.

    With ``stopping="increment"`` an iterate is accepted once the last update
    satisfies ``|du|_inf <= abs_tol + rel_tol * |u|_inf`` and the residual
    satisfies ``|R| <= abs_tol`` or ``|R| <= rel_tol * |R_0|``.  With
    ``"residual"`` only the residual test is applied, so an exact first
    correction is accepted without a confirming solve.
    """

    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_iters: int = 25
    stopping: str = "increment"

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.max_iters < 1:
            raise ValueError("tolerances must be positive and max_iters >= 1")
        if self.stopping not in ("increment", "residual"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")


@dataclass
class NewtonReport:
    iterations: int
    residual_norms: list[float]

    @property
    def residual(self) -> float:
        return self.residual_norms[-1]


class NewtonDivergence(RuntimeError):
    def __init__(self, message: str, residual: float, report: NewtonReport, step: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.report = report
        self.step = step


@dataclass(frozen=True)
class DiscretizationConfig:
    n_cells: int
    tau: float
    theta: float = 0.0
    M: int = 1
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    stiffness: str = "exact"
    initial: str = "l2"

    @property
    def tau_c(self) -> float:
        return self.M * self.tau

    def scheme(self, coarse: bool = False) -> ThetaScheme:
        return ThetaScheme(self.theta, self.tau_c if coarse else self.tau)


# -- building blocks ----------------------------------------------------------


def get_solver(opset: OperatorSet, config: SolverConfig | None = None) -> SystemSolver:
    """Solver cached on the operator set, so constant matrices are reused across calls."""
    config = config or SolverConfig()
    key = ("solver", config)
    if key not in opset._cache:
        opset._cache[key] = SystemSolver(opset, config)
    return opset._cache[key]


def nonlinear_terms(mesh: TensorMesh2D, u, jacobian: bool = True):
    """Interior load of ``f(u_h)`` and, optionally, the ``f'(u_h)``-weighted mass stencil."""
    F, S = kernels.allen_cahn_terms(mesh.pad(u), mesh.hx, mesh.hy, jacobian)
    return F[1:-1, 1:-1].ravel(), S


class SourceLoads:
    """Memoized source load vectors ``(g(., t), phi_i)``."""

    def __init__(self, problem: ProblemSpec, mesh: TensorMesh2D):
        self.problem = problem
        self.mesh = mesh
        self._cache: dict[float, np.ndarray] = {}
        self._parts = None
        if hasattr(problem.source, "spatial_parts"):
            self._parts = problem.source.spatial_parts(*mesh.quad_grid())

    def __call__(self, t: float) -> np.ndarray:
        if self.problem.source_is_zero:
            return np.zeros(self.mesh.n_dofs)
        key = round(float(t), 14)
        if key not in self._cache:
            if self._parts is None:
                self._cache[key] = assemble_load(self.problem.source, t, self.mesh)
            else:
                G = np.ascontiguousarray(self.problem.source.combine(self._parts, t))
                self._cache[key] = kernels.quad_load(G, self.mesh.hx, self.mesh.hy)[1:-1, 1:-1].ravel()
        return self._cache[key]


@dataclass(frozen=True)
class StepSystem:
    """Coefficients and right-hand side of ``a Mass U + b B U + c F(U) = r``."""

    a: float
    b: float
    c: float
    r: np.ndarray


def first_step_system(opset: OperatorSet, scheme: ThetaScheme, u0, G0, G1, F0=None) -> StepSystem:
    u0 = np.asarray(u0, dtype=float)
    if F0 is None:
        F0, _ = nonlinear_terms(opset.mesh, u0, jacobian=False)
    tau = scheme.tau
    r = opset.apply_mass(u0) / tau - 0.5 * opset.apply_B(u0) - 0.5 * F0 + 0.5 * (G0 + G1)
    return StepSystem(1.0 / tau, 0.5, 0.5, r)


def theta_step_system(opset: OperatorSet, scheme: ThetaScheme, u1, u2, G_new, G_old, F1=None) -> StepSystem:
    """System for ``U^n`` given ``u1 = U^{n-1}`` and ``u2 = U^{n-2}``."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if F1 is None:
        F1, _ = nonlinear_terms(opset.mesh, u1, jacobian=False)
    c0, c1, c2 = theta_weights(scheme)
    th = scheme.theta
    r = -opset.apply_mass(c1 * u1 + c2 * u2) - th * opset.apply_B(u1) - th * F1 + theta_blend(scheme, G_new, G_old)
    return StepSystem(c0, 1.0 - th, 1.0 - th, r)


def system_residual(opset: OperatorSet, system: StepSystem, u, F=None) -> np.ndarray:
    if F is None:
        F, _ = nonlinear_terms(opset.mesh, u, jacobian=False)
    return system.a * opset.apply_mass(u) + system.b * opset.apply_B(u) + system.c * F - system.r


def newton_solve(
    opset: OperatorSet, system: StepSystem, guess, newton: NewtonConfig, solver: SystemSolver
) -> tuple[np.ndarray, NewtonReport]:
    u = np.array(guess, dtype=float)
    norms: list[float] = []
    step_small = newton.stopping == "residual"
    for it in range(newton.max_iters + 1):
        F, S = nonlinear_terms(opset.mesh, u, jacobian=True)
        R = system_residual(opset, system, u, F)
        nr = float(np.linalg.norm(R))
        norms.append(nr)
        if not np.isfinite(nr):
            break
        if step_small and (nr <= newton.abs_tol or nr <= newton.rel_tol * norms[0]):
            return u, NewtonReport(it, norms)
        if it == newton.max_iters:
            break
        du = solver.solve(system.a, system.b, -R, system.c, S)
        u += du
        if newton.stopping == "increment":
            step_small = np.abs(du).max() <= newton.abs_tol + newton.rel_tol * np.abs(u).max()
    report = NewtonReport(len(norms) - 1, norms)
    raise NewtonDivergence(f"Newton did not converge; last residual {norms[-1]:.3e}", norms[-1], report)


def linearized_system(opset: OperatorSet, system: StepSystem, u_lin):
    """Matrix stencil and right-hand side of ``F`` linearized about ``u_lin``.

    Solving ``a Mass U + b B U + c W(f'(u_lin)) U = rhs`` is the first Newton
    iterate started from ``u_lin``.
    """
    u_lin = np.asarray(u_lin, dtype=float)
    F, S = nonlinear_terms(opset.mesh, u_lin, jacobian=True)
    rhs = system.r - system.c * F + system.c * stencil_matvec(opset.mesh, S, u_lin)
    return S, rhs


# -- public steps -------------------------------------------------------------


def _loads(problem, opset, loads):
    return loads if loads is not None else SourceLoads(problem, opset.mesh)


def first_step_nonlinear(
    state0: StateVector,
    opset: OperatorSet,
    problem: ProblemSpec,
    scheme: ThetaScheme,
    newton: NewtonConfig | None = None,
    *,
    solver: SystemSolver | None = None,
    loads: Callable | None = None,
) -> StateVector:
    """Crank-Nicolson step from ``state0``; Newton report attached as ``.report``."""
    loads = _loads(problem, opset, loads)
    solver = solver or get_solver(opset)
    t0 = state0.time_label
    u0 = np.asarray(state0, dtype=float)
    system = first_step_system(opset, scheme, u0, loads(t0), loads(t0 + scheme.tau))
    u1, report = newton_solve(opset, system, u0, newton or NewtonConfig(), solver)
    return StateVector(u1, t0 + scheme.tau, report)


def step_nonlinear(
    prev1: StateVector,
    prev2: StateVector,
    opset: OperatorSet,
    problem: ProblemSpec,
    scheme: ThetaScheme,
    newton: NewtonConfig | None = None,
    t_n: float | None = None,
    *,
    solver: SystemSolver | None = None,
    loads: Callable | None = None,
) -> StateVector:
    """Theta step to ``t_n`` from ``prev1 = U^{n-1}`` and ``prev2 = U^{n-2}``."""
    loads = _loads(problem, opset, loads)
    solver = solver or get_solver(opset)
    if t_n is None:
        t_n = prev1.time_label + scheme.tau
    u1 = np.asarray(prev1, dtype=float)
    system = theta_step_system(opset, scheme, u1, np.asarray(prev2, dtype=float), loads(t_n), loads(t_n - scheme.tau))
    un, report = newton_solve(opset, system, u1, newton or NewtonConfig(), solver)
    return StateVector(un, t_n, report)


@dataclass
class FeTrajectory:
    states: list[StateVector]
    opset: OperatorSet
    cpu_seconds: float
    newton_iterations: int

    @property
    def final(self) -> StateVector:
        return self.states[-1]


def n_steps(T: float, tau: float) -> int:
    n = round(T / tau)
    if n < 1 or abs(n * tau - T) > 1e-9 * T:
        raise ValueError(f"step {tau} does not divide the horizon {T}")
    return n


def nonlinear_trajectory(
    problem: ProblemSpec,
    opset: OperatorSet,
    scheme: ThetaScheme,
    newton: NewtonConfig,
    solver: SystemSolver,
    loads: Callable,
    u0: np.ndarray,
    steps: int,
    label: str = "step",
) -> list[StateVector]:
    states = [StateVector(u0, 0.0)]
    for n in range(1, steps + 1):
        try:
            if n == 1:
                s = first_step_nonlinear(states[0], opset, problem, scheme, newton, solver=solver, loads=loads)
            else:
                s = step_nonlinear(states[-1], states[-2], opset, problem, scheme, newton, n * scheme.tau,
                                   solver=solver, loads=loads)
        except NewtonDivergence as exc:
            exc.step = n
            exc.args = (f"{label} {n}: {exc.args[0]}",)
            raise
        states.append(s)
    return states


def run_standard_fe(problem: ProblemSpec, disc: DiscretizationConfig, opset: OperatorSet | None = None) -> FeTrajectory:
    """Nonlinear theta scheme on the fine step ``disc.tau`` with Newton at every level.

    ``cpu_seconds`` is the process CPU time of the whole run, assembly included.
    """
    start = time.process_time()
    mesh = TensorMesh2D.unit_square(disc.n_cells)
    if opset is None:
        opset = assemble_operators(mesh, problem.alpha, problem.epsilon, disc.stiffness)
    solver = SystemSolver(opset, disc.solver)
    loads = SourceLoads(problem, mesh)
    u0 = initial_coefficients(problem.u0, mesh, disc.initial)
    scheme = disc.scheme()
    states = nonlinear_trajectory(problem, opset, scheme, disc.newton, solver, loads, u0, n_steps(problem.T, disc.tau))
    iters = sum(s.report.iterations for s in states[1:])
    return FeTrajectory(states, opset, time.process_time() - start, iters)
